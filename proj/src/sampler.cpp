#include "derev/sampler.hpp"

#include <cmath>
#include <random>

#include "derev/score_protocol.hpp"

namespace derev {

DiffusionSchedule build_schedule(double t_max, double t_min, int steps, double rho) {
  if (!(t_max > t_min && t_min > 0.0)) throw ConfigError("schedule: need t_max > t_min > 0");
  if (steps < 2) throw ConfigError("schedule: need at least 2 steps");
  if (!(rho > 0.0)) throw ConfigError("schedule: rho must be positive");
  DiffusionSchedule s{t_max, t_min, steps, rho, {}};
  s.sigmas.resize(steps);
  const double a = std::pow(t_max, 1.0 / rho), b = std::pow(t_min, 1.0 / rho);
  for (int n = 0; n < steps; ++n) s.sigmas[n] = std::pow(a + n / double(steps - 1) * (b - a), rho);
  s.sigmas.front() = t_max;
  s.sigmas.back() = t_min;
  return s;
}

void SamplerConfig::validate() const {
  if (!(s_churn >= 0.0)) throw ConfigError("sampler: s_churn must be >= 0");
  if (!(s_noise >= 0.0)) throw ConfigError("sampler: s_noise must be >= 0");
  if (order != 1 && order != 2) throw ConfigError("sampler: order must be 1 or 2");
  if (!(zeta_prime >= 0.0)) throw ConfigError("sampler: zeta_prime must be >= 0");
  if (!(zeta_constant >= 0.0)) throw ConfigError("sampler: zeta_constant must be >= 0");
  if (rescale && !(sigma_data > 0.0)) throw ConfigError("sampler: sigma_data must be positive");
}

void InferenceConfig::validate() const {
  op.validate();
  compression.validate();
  if (rir.iterations < 0) throw ConfigError("rir: iterations must be >= 0");
  rir.adam.validate();
  rir.regularizer.validate();
  if (!(rir.bounds.weight_db_min <= rir.bounds.weight_db_max && rir.bounds.decay_min <= rir.bounds.decay_max))
    throw ConfigError("rir: empty constraint box");
  build_schedule(schedule.t_max, schedule.t_min, schedule.steps, schedule.rho);
  sampler.validate();
  wpe.validate();
}

Waveform sampler_step(const Waveform& x, double sigma, double sigma_next, const Waveform& s, const Waveform& g) {
  return x - sigma * (sigma_next - sigma) * (s + g);
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed ^ (stream * 0xd1b54a32d192ed03ULL);
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

LikelihoodScore likelihood_with(const Waveform& x, double sigma, const Waveform& s, ScoreModel& model,
                                const ReconstructionCost& objective, const ComplexSpectrogram& H,
                                const InferenceConfig& cfg, bool exact_jacobian) {
  const auto& sc = cfg.sampler;
  LikelihoodScore out;
  const Waveform xhat0 = x + sigma * sigma * s;
  Rescaled r;
  if (sc.rescale) {
    r = rescale_estimate(xhat0, sc.sigma_data);
    out.rescale_degenerate = r.degenerate;
  } else {
    r.value = xhat0;
  }
  Waveform g_out;
  out.cost = objective.value_and_gradient(apply_operator(r.value, H, cfg.op), g_out);
  Waveform grad = operator_adjoint_x(H, cfg.op, g_out, x.size());
  if (sc.rescale) grad = rescale_vjp(xhat0, sc.sigma_data, grad);
  if (exact_jacobian) grad += sigma * sigma * model.score_vjp(x, sigma, grad);
  out.grad_norm = grad.norm();
  out.zeta = sc.weighting == LikelihoodWeighting::NormNormalized
                 ? likelihood_weight(out.grad_norm, x.size(), sc.zeta_prime)
                 : sc.zeta_constant;
  out.g = -out.zeta * grad;
  return out;
}

Waveform checked_score(ScoreModel& model, const Waveform& x, double sigma) {
  Waveform s = model.score(x, sigma);
  if (s.size() != x.size()) throw ShapeError("score model returned " + std::to_string(s.size()) + " samples");
  if (!s.allFinite()) throw NumericalError("score model returned non-finite values");
  return s;
}

InferenceResult run_inference(const Waveform& y, ScoreModel& model, const InferenceConfig& cfg,
                              const InferenceOptions& options, const ComplexSpectrogram* fixed_kernel) {
  cfg.validate();
  if (y.size() == 0) throw SizingError("inference: empty observation");
  if (!y.allFinite()) throw NumericalError("inference: observation contains non-finite samples");
  const auto& sc = cfg.sampler;
  const DiffusionSchedule schedule =
      build_schedule(cfg.schedule.t_max, cfg.schedule.t_min, cfg.schedule.steps, cfg.schedule.rho);
  const int N = schedule.steps;
  const bool blind = fixed_kernel == nullptr;
  const bool exact = sc.jacobian == JacobianMode::Auto && model.has_jacobian();

  InferenceResult result;
  result.jacobian = exact ? "exact" : "identity";

  std::mt19937_64 rng(mix_seed(sc.seed, 1));
  std::normal_distribution<double> normal;
  auto gaussian = [&](Eigen::Index n) {
    Waveform v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
  };

  const Waveform x_init = options.x_init ? *options.x_init : wpe_dereverb(y, cfg.wpe);
  if (x_init.size() != y.size()) throw ShapeError("inference: initial estimate must match the observation length");
  const double init_noise = sc.init_noise < 0.0 ? schedule.t_max : sc.init_noise;
  Waveform x = x_init + init_noise * gaussian(y.size());

  RirParams psi;
  AdamState adam;
  ComplexSpectrogram H;
  if (blind) {
    psi = options.psi_init ? *options.psi_init
                           : RirParams::initial(cfg.op, cfg.rir.init_weight_db, cfg.rir.init_decay, mix_seed(sc.seed, 2));
    psi = project_params(psi, cfg.rir.bounds);
    adam = AdamState(cfg.rir.adam, psi);
    H = apply_projection(assemble_rir(psi, cfg.op), cfg.op);
  } else {
    H = *fixed_kernel;
  }

  const ReconstructionCost objective(y, cfg.compression, y.size() + cfg.op.rir_length());
  result.initial_cost = objective.value(apply_operator(x_init, H, cfg.op));

  for (int i = 0; i < N; ++i) {
    const double sigma = schedule.sigmas[i];
    const double sigma_next = i + 1 < N ? schedule.sigmas[i + 1] : 0.0;
    StepDiagnostics diag;
    diag.step = i;
    diag.sigma = sigma;
    try {
      const double gamma =
          (sigma >= sc.s_tmin && sigma <= sc.s_tmax) ? std::min(sc.s_churn / N, std::sqrt(2.0) - 1.0) : 0.0;
      const double sigma_hat = sigma * (1.0 + gamma);
      diag.sigma_hat = sigma_hat;
      if (sigma_hat > sigma)
        x += std::sqrt(sigma_hat * sigma_hat - sigma * sigma) * sc.s_noise * gaussian(x.size());

      const Waveform s = checked_score(model, x, sigma_hat);
      if (blind && cfg.rir.iterations > 0) {
        Waveform xhat0 = x + sigma_hat * sigma_hat * s;
        if (sc.rescale) xhat0 = rescale_estimate(xhat0, sc.sigma_data).value;
        if (!cfg.rir.persist_moments) adam.reset();
        RirOptResult opt = rir_opt_loop(psi, xhat0, y, cfg.rir.iterations, sigma, adam, cfg.rir, cfg.op,
                                        cfg.compression, mix_seed(sc.seed, 1000 + static_cast<std::uint64_t>(i)));
        psi = opt.params;
        diag.regularizer = opt.trace.regularizer.back();
        H = apply_projection(assemble_rir(psi, cfg.op), cfg.op);
      }

      const LikelihoodScore lh = likelihood_with(x, sigma_hat, s, model, objective, H, cfg, exact);
      diag.cost = lh.cost;
      diag.zeta = lh.zeta;
      diag.grad_norm = lh.grad_norm;
      diag.rescale_degenerate = lh.rescale_degenerate;

      Waveform x_next = sampler_step(x, sigma_hat, sigma_next, s, lh.g);
      if (sc.order == 2 && sigma_next > 0.0) {
        const Waveform s2 = checked_score(model, x_next, sigma_next);
        const LikelihoodScore lh2 = likelihood_with(x_next, sigma_next, s2, model, objective, H, cfg, exact);
        const Waveform slope = sigma_hat * (s + lh.g) + sigma_next * (s2 + lh2.g);
        x_next = x - 0.5 * (sigma_next - sigma_hat) * slope;
      }
      if (!x_next.allFinite()) throw NumericalError("sampler produced non-finite samples");
      x = std::move(x_next);
    } catch (const NumericalError& e) {
      throw NumericalError("step " + std::to_string(i) + ": " + e.what());
    } catch (const ProtocolError& e) {
      throw ProtocolError("step " + std::to_string(i) + ": " + e.what());
    } catch (const ShapeError& e) {
      throw ShapeError("step " + std::to_string(i) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("step " + std::to_string(i) + ": " + e.what());
    }
    result.steps.push_back(diag);
  }

  result.x0 = x;
  if (blind) result.psi = psi;
  result.rir = rir_synthesis(H, cfg.op);
  result.final_cost = objective.value(apply_operator(x, H, cfg.op));
  return result;
}

}  // namespace

LikelihoodScore likelihood_score(const Waveform& x, double sigma, const Waveform& s, ScoreModel& model,
                                 const Waveform& y, const ComplexSpectrogram& H, const InferenceConfig& cfg) {
  const ReconstructionCost objective(y, cfg.compression, x.size() + cfg.op.rir_length());
  const bool exact = cfg.sampler.jacobian == JacobianMode::Auto && model.has_jacobian();
  return likelihood_with(x, sigma, s, model, objective, H, cfg, exact);
}

InferenceResult run_blind_inference(const Waveform& y, ScoreModel& model, const InferenceConfig& cfg,
                                    const InferenceOptions& options) {
  return run_inference(y, model, cfg, options, nullptr);
}

InferenceResult run_informed_inference(const Waveform& y, const Waveform& h, ScoreModel& model,
                                       const InferenceConfig& cfg, const InferenceOptions& options) {
  if (h.size() == 0) throw SizingError("informed inference: empty RIR");
  const ComplexSpectrogram H = rir_analysis(h, cfg.op);
  return run_inference(y, model, cfg, options, &H);
}

}  // namespace derev
