#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "derev/config.hpp"
#include "derev/score_protocol.hpp"
#include "derev/wav.hpp"

using namespace derev;
using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

std::unique_ptr<ScoreModel> make_score_model(const RunConfig& cfg, Eigen::Index length) {
  if (cfg.score_model.rfind("external:", 0) == 0)
    return std::make_unique<ExternalScoreModel>(cfg.score_model.substr(9), cfg.score_timeout);
  const double sd = cfg.inference.sampler.sigma_data;
  const double variance = cfg.prior_variance > 0.0 ? cfg.prior_variance : sd * sd;
  Waveform mean = Waveform::Zero(length);
  if (!cfg.prior_mean.empty()) {
    const Waveform m = read_wav(cfg.prior_mean, cfg.inference.op.stft.sample_rate);
    if (m.size() > length) throw ConfigError("prior mean is longer than the observation");
    mean.head(m.size()) = m;
  }
  return std::make_unique<GaussianPrior>(mean, variance);
}

json steps_to_json(const InferenceResult& r) {
  json steps = json::array();
  for (const auto& s : r.steps)
    steps.push_back({{"step", s.step},
                     {"sigma", s.sigma},
                     {"sigma_hat", s.sigma_hat},
                     {"cost", s.cost},
                     {"regularizer", s.regularizer},
                     {"zeta", s.zeta},
                     {"grad_norm", s.grad_norm},
                     {"rescale_degenerate", s.rescale_degenerate}});
  return steps;
}

void write_report(const std::string& path, const json& report) {
  if (path.empty()) return;
  std::ofstream f(path);
  if (!f) throw IoError("cannot write report '" + path + "'");
  f << report.dump(2) << '\n';
}

int run(const RunConfig& cfg) {
  const int rate = cfg.inference.op.stft.sample_rate;
  json report{{"schema_version", kSchemaVersion}, {"mode", to_string(cfg.mode)}, {"config", to_json(cfg)}};

  if (cfg.mode == RunMode::Benchmark) {
    BenchmarkConfig bc;
    bc.corpus_dir = cfg.corpus;
    bc.jobs = cfg.jobs;
    bc.seed = cfg.seed;
    bc.inference = cfg.inference;
    bc.mode = cfg.pipeline;
    if (!cfg.input.empty() || !cfg.output.empty()) std::cerr << "note: --in/--out are ignored in benchmark mode\n";
    const auto rows = run_benchmark(bc, [&](Eigen::Index n) { return make_score_model(cfg, n); });
    if (cfg.csv.empty()) {
      write_benchmark_csv(std::cout, rows, bc.mode);
    } else {
      std::ofstream f(cfg.csv);
      if (!f) throw IoError("cannot write '" + cfg.csv + "'");
      write_benchmark_csv(f, rows, bc.mode);
    }
    int failed = 0;
    for (const auto& r : rows) failed += r.ok ? 0 : 1;
    report["items"] = rows.size();
    report["failed"] = failed;
    write_report(cfg.report, report);
    return 0;
  }

  const Waveform y = read_wav(cfg.input, rate);
  if (cfg.mode == RunMode::Wpe) {
    const WpeResult w = wpe_spectrogram(stft(y, cfg.inference.wpe.stft), cfg.inference.wpe);
    write_wav(cfg.output, istft(w.spectrogram, cfg.inference.wpe.stft, y.size()), rate);
    report["wpe_objective"] = w.objective;
    write_report(cfg.report, report);
    return 0;
  }

  InferenceConfig inf = cfg.inference;
  inf.sampler.seed = cfg.seed;
  auto model = make_score_model(cfg, y.size());
  InferenceResult result;
  if (cfg.mode == RunMode::Informed) {
    const Waveform h = read_wav(cfg.rir_in, rate);
    result = run_informed_inference(y, h, *model, inf);
  } else {
    result = run_blind_inference(y, *model, inf);
  }
  write_wav(cfg.output, result.x0, rate);
  if (!cfg.rir_out.empty()) write_wav(cfg.rir_out, result.rir, rate);
  report["score_model"] = model->name();
  report["jacobian"] = result.jacobian;
  report["initial_cost"] = result.initial_cost;
  report["final_cost"] = result.final_cost;
  report["steps"] = steps_to_json(result);
  if (result.psi) report["params"] = to_json(*result.psi);
  write_report(cfg.report, report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind single-channel speech dereverberation by diffusion posterior sampling"};
  std::string mode, pipeline, input, output, rir_in, rir_out, config_path, score_model, report, corpus, csv;
  std::uint64_t seed = 0;
  int steps = 0, inner_its = -1, jobs = 0;
  bool print_config = false;
  app.add_option("--mode", mode, "blind | informed | wpe | benchmark");
  app.add_option("--in", input, "Reverberant input WAV (mono)");
  app.add_option("--out", output, "Output WAV (32-bit float)");
  app.add_option("--rir-in", rir_in, "Measured RIR WAV for informed mode");
  app.add_option("--rir-out", rir_out, "Write the estimated RIR as WAV");
  app.add_option("--config", config_path, "JSON configuration file");
  auto* seed_opt = app.add_option("--seed", seed, "Random seed");
  app.add_option("--score-model", score_model, "gaussian | external:<command>");
  app.add_option("--steps", steps, "Number of diffusion steps");
  app.add_option("--inner-its", inner_its, "RIR optimizer iterations per diffusion step");
  app.add_option("--report", report, "Write a JSON diagnostics report");
  app.add_option("--corpus", corpus, "Benchmark corpus directory");
  app.add_option("--csv", csv, "Benchmark CSV output (default stdout)");
  app.add_option("--pipeline", pipeline, "Benchmark pipeline: wpe | informed | blind");
  app.add_option("--jobs", jobs, "Benchmark worker threads");
  app.add_flag("--print-config", print_config, "Print the effective configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw IoError("cannot open config '" + config_path + "'");
      json j;
      try {
        j = json::parse(f);
      } catch (const json::exception& e) {
        throw ConfigError("config '" + config_path + "' is not valid JSON: " + e.what());
      }
      cfg = run_config_from_json(j);
    }
    if (!mode.empty()) cfg.mode = parse_run_mode(mode);
    if (!input.empty()) cfg.input = input;
    if (!output.empty()) cfg.output = output;
    if (!rir_in.empty()) cfg.rir_in = rir_in;
    if (!rir_out.empty()) cfg.rir_out = rir_out;
    if (!report.empty()) cfg.report = report;
    if (!corpus.empty()) cfg.corpus = corpus;
    if (!csv.empty()) cfg.csv = csv;
    if (!pipeline.empty()) cfg.pipeline = parse_benchmark_mode(pipeline);
    if (!score_model.empty()) cfg.score_model = score_model;
    if (*seed_opt) cfg.seed = seed;
    if (steps != 0) cfg.inference.schedule.steps = steps;
    if (inner_its >= 0) cfg.inference.rir.iterations = inner_its;
    if (jobs != 0) cfg.jobs = jobs;
    if (print_config) {
      std::cout << to_json(cfg).dump(2) << '\n';
      return 0;
    }
    cfg.validate();
    return run(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const SizingError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 1;
  } catch (const ShapeError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 1;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 2;
  } catch (const ProtocolError& e) {
    std::cerr << "score model error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  }
}
