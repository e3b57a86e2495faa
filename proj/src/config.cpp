#include "derev/config.hpp"

#include <cmath>
#include <limits>
#include <set>

namespace derev {

using nlohmann::json;

RunMode parse_run_mode(const std::string& s) {
  if (s == "blind") return RunMode::Blind;
  if (s == "informed") return RunMode::Informed;
  if (s == "wpe") return RunMode::Wpe;
  if (s == "benchmark") return RunMode::Benchmark;
  throw ConfigError("unknown mode '" + s + "' (expected blind, informed, wpe or benchmark)");
}

BenchmarkMode parse_benchmark_mode(const std::string& s) {
  if (s == "wpe") return BenchmarkMode::Wpe;
  if (s == "informed") return BenchmarkMode::Informed;
  if (s == "blind") return BenchmarkMode::Blind;
  throw ConfigError("unknown benchmark pipeline '" + s + "' (expected wpe, informed or blind)");
}

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Blind:
      return "blind";
    case RunMode::Informed:
      return "informed";
    case RunMode::Wpe:
      return "wpe";
    case RunMode::Benchmark:
      return "benchmark";
  }
  return "unknown";
}

namespace {

// Reads the keys of one JSON object and rejects any it did not consume.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: '" + name(key) + "' has the wrong type");
    }
  }

  void get_double(const char* key, double& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (it->is_null()) {
      out = std::numeric_limits<double>::infinity();
      return;
    }
    if (!it->is_number()) throw ConfigError("config: '" + name(key) + "' must be a number");
    out = it->get<double>();
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("config: unknown key '" + name(it.key().c_str()) + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_stft(const json& j, StftConfig& s) {
  Section sec(j, "stft");
  sec.get("window_length", s.window_length);
  sec.get("hop", s.hop);
  sec.get("fft_size", s.fft_size);
  sec.get("sample_rate", s.sample_rate);
  std::string window = s.window == WindowKind::Hann ? "hann" : "rectangular";
  sec.get("window", window);
  if (window == "hann")
    s.window = WindowKind::Hann;
  else if (window == "rectangular")
    s.window = WindowKind::Rectangular;
  else
    throw ConfigError("config: unknown window '" + window + "'");
  sec.finish();
}

void read_rir(const json& j, RirOptConfig& r) {
  Section sec(j, "rir");
  sec.get("iterations", r.iterations);
  sec.get_double("init_weight_db", r.init_weight_db);
  sec.get_double("init_decay", r.init_decay);
  sec.get("persist_moments", r.persist_moments);
  sec.get("use_regularizer", r.use_regularizer);
  if (const json* b = sec.child("bounds")) {
    Section bs(*b, "rir.bounds");
    bs.get_double("weight_db_min", r.bounds.weight_db_min);
    bs.get_double("weight_db_max", r.bounds.weight_db_max);
    bs.get_double("decay_min", r.bounds.decay_min);
    bs.get_double("decay_max", r.bounds.decay_max);
    bs.finish();
  }
  if (const json* a = sec.child("adam")) {
    Section as(*a, "rir.adam");
    as.get_double("lr", r.adam.lr);
    as.get_double("beta1", r.adam.beta1);
    as.get_double("beta2", r.adam.beta2);
    as.get_double("eps", r.adam.eps);
    as.finish();
  }
  if (const json* g = sec.child("regularizer")) {
    Section gs(*g, "rir.regularizer");
    gs.get_double("sigma_min", r.regularizer.sigma_min);
    gs.get_double("sigma_max", r.regularizer.sigma_max);
    gs.finish();
  }
  sec.finish();
}

void read_sampler(const json& j, SamplerConfig& s) {
  Section sec(j, "sampler");
  sec.get_double("s_churn", s.s_churn);
  sec.get_double("s_noise", s.s_noise);
  sec.get_double("s_tmin", s.s_tmin);
  sec.get_double("s_tmax", s.s_tmax);
  sec.get("order", s.order);
  sec.get_double("zeta_prime", s.zeta_prime);
  std::string weighting = s.weighting == LikelihoodWeighting::NormNormalized ? "norm" : "constant";
  sec.get("weighting", weighting);
  if (weighting == "norm")
    s.weighting = LikelihoodWeighting::NormNormalized;
  else if (weighting == "constant")
    s.weighting = LikelihoodWeighting::Constant;
  else
    throw ConfigError("config: sampler.weighting must be 'norm' or 'constant'");
  sec.get_double("zeta_constant", s.zeta_constant);
  sec.get("rescale", s.rescale);
  sec.get_double("sigma_data", s.sigma_data);
  sec.get_double("init_noise", s.init_noise);
  std::string jac = s.jacobian == JacobianMode::Auto ? "auto" : "identity";
  sec.get("jacobian", jac);
  if (jac == "auto")
    s.jacobian = JacobianMode::Auto;
  else if (jac == "identity")
    s.jacobian = JacobianMode::Identity;
  else
    throw ConfigError("config: sampler.jacobian must be 'auto' or 'identity'");
  sec.finish();
}

}  // namespace

RunConfig run_config_from_json(const json& j, RunConfig cfg) {
  Section top(j, "");
  std::string mode = to_string(cfg.mode);
  top.get("mode", mode);
  cfg.mode = parse_run_mode(mode);
  top.get("seed", cfg.seed);
  top.get("input", cfg.input);
  top.get("output", cfg.output);
  top.get("rir_in", cfg.rir_in);
  top.get("rir_out", cfg.rir_out);
  top.get("report", cfg.report);
  top.get("corpus", cfg.corpus);
  top.get("csv", cfg.csv);
  std::string pipeline = to_string(cfg.pipeline);
  top.get("pipeline", pipeline);
  cfg.pipeline = parse_benchmark_mode(pipeline);
  top.get("jobs", cfg.jobs);
  top.get("score_model", cfg.score_model);
  top.get_double("score_timeout", cfg.score_timeout);
  if (const json* p = top.child("prior")) {
    Section ps(*p, "prior");
    ps.get("mean", cfg.prior_mean);
    ps.get_double("variance", cfg.prior_variance);
    ps.finish();
  }

  InferenceConfig& inf = cfg.inference;
  bool stft_changed = false;
  if (const json* s = top.child("stft")) {
    read_stft(*s, inf.op.stft);
    stft_changed = true;
  }
  std::vector<double> band_hz;
  if (const json* o = top.child("operator")) {
    Section os(*o, "operator");
    os.get("n_frames", inf.op.n_frames);
    os.get("band_centers_hz", band_hz);
    os.finish();
  }
  if (!band_hz.empty()) {
    std::vector<double> bins;
    for (double f : band_hz) bins.push_back(f * inf.op.stft.fft_size / inf.op.stft.sample_rate);
    inf.op.bands = BandLayout::from_bins(bins);
  } else if (stft_changed) {
    inf.op.bands = BandLayout::standard(inf.op.stft);
  }
  inf.compression.stft = inf.op.stft;
  inf.wpe.stft = inf.op.stft;

  if (const json* c = top.child("compression")) {
    Section cs(*c, "compression");
    cs.get_double("exponent", inf.compression.exponent);
    cs.finish();
  }
  if (const json* r = top.child("rir")) read_rir(*r, inf.rir);
  if (const json* s = top.child("schedule")) {
    Section ss(*s, "schedule");
    ss.get_double("t_max", inf.schedule.t_max);
    ss.get_double("t_min", inf.schedule.t_min);
    ss.get("steps", inf.schedule.steps);
    ss.get_double("rho", inf.schedule.rho);
    ss.finish();
  }
  if (const json* s = top.child("sampler")) read_sampler(*s, inf.sampler);
  if (const json* w = top.child("wpe")) {
    Section ws(*w, "wpe");
    ws.get("iterations", inf.wpe.iterations);
    ws.get("taps", inf.wpe.taps);
    ws.get("delay", inf.wpe.delay);
    ws.get_double("variance_floor", inf.wpe.variance_floor);
    ws.get_double("loading", inf.wpe.loading);
    ws.finish();
  }
  top.finish();
  return cfg;
}

void RunConfig::validate() const {
  inference.validate();
  if (jobs < 1) throw ConfigError("config: jobs must be >= 1");
  if (!(score_timeout > 0.0)) throw ConfigError("config: score_timeout must be positive");
  if (score_model != "gaussian" && score_model.rfind("external:", 0) != 0)
    throw ConfigError("config: score model must be 'gaussian' or 'external:<command>'");
  if (score_model == "external:") throw ConfigError("config: external score model needs a command");
  if (mode == RunMode::Benchmark) {
    if (corpus.empty()) throw ConfigError("config: benchmark mode needs a corpus directory");
  } else {
    if (input.empty()) throw ConfigError("config: an input WAV is required");
    if (output.empty()) throw ConfigError("config: an output WAV path is required");
  }
  if (mode == RunMode::Informed && rir_in.empty()) throw ConfigError("config: informed mode needs --rir-in");
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json to_json(const RunConfig& cfg) {
  const auto& inf = cfg.inference;
  const auto& st = inf.op.stft;
  json bands = json::array();
  for (double b : inf.op.bands.center_bins) bands.push_back(b * st.sample_rate / st.fft_size);
  const auto& sc = inf.sampler;
  return json{
      {"mode", to_string(cfg.mode)},
      {"seed", cfg.seed},
      {"input", cfg.input},
      {"output", cfg.output},
      {"rir_in", cfg.rir_in},
      {"rir_out", cfg.rir_out},
      {"report", cfg.report},
      {"corpus", cfg.corpus},
      {"csv", cfg.csv},
      {"pipeline", to_string(cfg.pipeline)},
      {"jobs", cfg.jobs},
      {"score_model", cfg.score_model},
      {"score_timeout", cfg.score_timeout},
      {"prior", {{"mean", cfg.prior_mean}, {"variance", cfg.prior_variance}}},
      {"stft",
       {{"window_length", st.window_length},
        {"hop", st.hop},
        {"fft_size", st.fft_size},
        {"sample_rate", st.sample_rate},
        {"window", st.window == WindowKind::Hann ? "hann" : "rectangular"}}},
      {"operator", {{"n_frames", inf.op.n_frames}, {"band_centers_hz", bands}}},
      {"compression", {{"exponent", inf.compression.exponent}}},
      {"rir",
       {{"iterations", inf.rir.iterations},
        {"init_weight_db", inf.rir.init_weight_db},
        {"init_decay", inf.rir.init_decay},
        {"persist_moments", inf.rir.persist_moments},
        {"use_regularizer", inf.rir.use_regularizer},
        {"bounds",
         {{"weight_db_min", inf.rir.bounds.weight_db_min},
          {"weight_db_max", inf.rir.bounds.weight_db_max},
          {"decay_min", inf.rir.bounds.decay_min},
          {"decay_max", inf.rir.bounds.decay_max}}},
        {"adam",
         {{"lr", inf.rir.adam.lr}, {"beta1", inf.rir.adam.beta1}, {"beta2", inf.rir.adam.beta2}, {"eps", inf.rir.adam.eps}}},
        {"regularizer", {{"sigma_min", inf.rir.regularizer.sigma_min}, {"sigma_max", inf.rir.regularizer.sigma_max}}}}},
      {"schedule",
       {{"t_max", inf.schedule.t_max}, {"t_min", inf.schedule.t_min}, {"steps", inf.schedule.steps}, {"rho", inf.schedule.rho}}},
      {"sampler",
       {{"s_churn", sc.s_churn},
        {"s_noise", sc.s_noise},
        {"s_tmin", sc.s_tmin},
        {"s_tmax", finite_or_null(sc.s_tmax)},
        {"order", sc.order},
        {"zeta_prime", sc.zeta_prime},
        {"weighting", sc.weighting == LikelihoodWeighting::NormNormalized ? "norm" : "constant"},
        {"zeta_constant", sc.zeta_constant},
        {"rescale", sc.rescale},
        {"sigma_data", sc.sigma_data},
        {"init_noise", sc.init_noise},
        {"jacobian", sc.jacobian == JacobianMode::Auto ? "auto" : "identity"}}},
      {"wpe",
       {{"iterations", inf.wpe.iterations},
        {"taps", inf.wpe.taps},
        {"delay", inf.wpe.delay},
        {"variance_floor", inf.wpe.variance_floor},
        {"loading", inf.wpe.loading}}},
  };
}

json to_json(const RirParams& p) {
  json phases = json::array();
  for (Eigen::Index n = 0; n < p.phases.rows(); ++n) {
    json row = json::array();
    for (Eigen::Index k = 0; k < p.phases.cols(); ++k) row.push_back(p.phases(n, k));
    phases.push_back(std::move(row));
  }
  return json{{"weights_db", std::vector<double>(p.weights_db.data(), p.weights_db.data() + p.weights_db.size())},
              {"decays", std::vector<double>(p.decays.data(), p.decays.data() + p.decays.size())},
              {"phases", std::move(phases)}};
}

}  // namespace derev
