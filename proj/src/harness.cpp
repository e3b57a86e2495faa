#include "derev/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <random>
#include <thread>

#include "derev/wav.hpp"

namespace derev {

namespace {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

GeneratedRir generate_rir(const SyntheticRirSpec& spec, const OperatorConfig& base) {
  OperatorConfig op = base;
  op.n_frames = spec.n_frames;
  op.validate();
  std::mt19937_64 rng(mix_seed(spec.seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GeneratedRir out;

  if (spec.family == RirFamily::InFamily) {
    if (!(spec.weight_db_min <= spec.weight_db_max && spec.decay_min <= spec.decay_max))
      throw ConfigError("generate_rir: empty draw range");
    RirParams psi = RirParams::initial(op, 0.0, 0.0, rng());
    for (int b = 0; b < op.bands.size(); ++b) {
      psi.weights_db[b] = spec.weight_db_min + unit(rng) * (spec.weight_db_max - spec.weight_db_min);
      psi.decays[b] = spec.decay_min + unit(rng) * (spec.decay_max - spec.decay_min);
    }
    out.h = rir_synthesis(apply_projection(assemble_rir(psi, op), op), op);
    out.psi = psi;
    return out;
  }

  if (!(spec.rt60_seconds > 0.0)) throw ConfigError("generate_rir: rt60 must be positive");
  const Eigen::Index L = op.rir_length();
  const double rate = 3.0 * std::log(10.0) / (spec.rt60_seconds * op.stft.sample_rate);
  std::normal_distribution<double> normal;
  Waveform tail = Waveform::Zero(L);
  for (Eigen::Index n = 1; n < L; ++n) tail[n] = normal(rng) * std::exp(-rate * n);
  const double energy = tail.squaredNorm();
  const double gain = energy > 0.0 ? std::sqrt(std::pow(10.0, -spec.drr_db / 10.0) / energy) : 0.0;
  out.h = gain * tail;
  out.h[0] = 1.0;
  return out;
}

Waveform convolve(const Waveform& x, const Waveform& h) {
  if (x.size() == 0 || h.size() == 0) return Waveform();
  const Eigen::Index n_out = x.size() + h.size() - 1;
  int n = 2;
  while (n < n_out) n *= 2;
  RealFft<double> fa(n), fb(n);
  std::copy(x.data(), x.data() + x.size(), fa.time.begin());
  std::copy(h.data(), h.data() + h.size(), fb.time.begin());
  fa.forward();
  fb.forward();
  for (std::size_t k = 0; k < fa.freq.size(); ++k) fa.freq[k] *= fb.freq[k];
  fa.inverse();
  return Eigen::Map<const Waveform>(fa.time.data(), n_out);
}

double lsd(const Waveform& x, const Waveform& ref, const StftConfig& cfg) {
  if (x.size() != ref.size()) throw ShapeError("lsd: signals differ in length");
  const ComplexSpectrogram X = stft(x, cfg), R = stft(ref, cfg);
  auto db = [](const std::complex<double>& z) { return 20.0 * std::log10(std::max(std::abs(z), 1e-8)); };
  double total = 0.0;
  for (Eigen::Index t = 0; t < X.rows(); ++t) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
      const double d = db(X(t, k)) - db(R(t, k));
      acc += d * d;
    }
    total += std::sqrt(acc / X.cols());
  }
  return total / X.rows();
}

double si_sdr(const Waveform& x, const Waveform& ref) {
  if (x.size() != ref.size()) throw ShapeError("si_sdr: signals differ in length");
  const double rr = ref.squaredNorm();
  if (!(rr > 0.0)) throw NumericalError("si_sdr: reference is all zeros");
  const Waveform target = (x.dot(ref) / rr) * ref;
  const double num = target.squaredNorm(), den = (x - target).squaredNorm();
  if (den <= num * 1e-10) return 100.0;
  if (num <= den * 1e-10) return -100.0;
  return std::clamp(10.0 * std::log10(num / den), -100.0, 100.0);
}

std::string to_string(BenchmarkMode mode) {
  switch (mode) {
    case BenchmarkMode::Wpe:
      return "wpe";
    case BenchmarkMode::Informed:
      return "informed";
    case BenchmarkMode::Blind:
      return "blind";
  }
  return "unknown";
}

namespace {

BenchmarkRow run_item(const std::string& dir, const std::string& id, const BenchmarkConfig& cfg,
                      const ScoreModelFactory& models) {
  BenchmarkRow row;
  row.id = id;
  const auto start = std::chrono::steady_clock::now();
  try {
    const int rate = cfg.inference.op.stft.sample_rate;
    const Waveform clean = read_wav(dir + "/" + id + ".clean.wav", rate);
    const Waveform h = read_wav(dir + "/" + id + ".rir.wav", rate);
    if (clean.size() == 0 || h.size() == 0) throw IoError("empty audio");
    const Waveform y = convolve(clean, h);
    const Eigen::Index L = clean.size();

    InferenceConfig inf = cfg.inference;
    inf.sampler.seed = mix_seed(cfg.seed ^ fnv1a(id));
    const ComplexSpectrogram Htrue = rir_analysis(h, inf.op);
    const ReconstructionCost objective(y, inf.compression, y.size() + inf.op.rir_length());
    auto metrics = [&](const Waveform& est) {
      MetricReport m;
      m.lsd_db = lsd(est.head(L), clean, inf.op.stft);
      m.si_sdr_db = si_sdr(est.head(L), clean);
      m.cost_C = objective.value(apply_operator(est, Htrue, inf.op));
      return m;
    };
    row.input = metrics(y);

    Waveform out;
    if (cfg.mode == BenchmarkMode::Wpe) {
      out = wpe_dereverb(y, inf.wpe);
    } else {
      std::unique_ptr<ScoreModel> model = models(y.size());
      if (!model) throw ConfigError("no score model available");
      out = cfg.mode == BenchmarkMode::Informed ? run_informed_inference(y, h, *model, inf).x0
                                                : run_blind_inference(y, *model, inf).x0;
    }
    row.output = metrics(out);
    row.ok = true;
  } catch (const std::exception& e) {
    row.ok = false;
    row.message = e.what();
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

}  // namespace

std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& cfg, const ScoreModelFactory& models) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(cfg.corpus_dir, ec)) throw IoError("corpus directory '" + cfg.corpus_dir + "' not found");
  std::vector<std::string> ids;
  const std::string suffix = ".clean.wav";
  for (const auto& entry : fs::directory_iterator(cfg.corpus_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      ids.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(ids.begin(), ids.end());

  std::vector<BenchmarkRow> rows(ids.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < ids.size(); i = next++) rows[i] = run_item(cfg.corpus_dir, ids[i], cfg, models);
  };
  const int jobs = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(ids.size())));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows, BenchmarkMode mode) {
  out << "id,mode,status,lsd_in_db,lsd_out_db,si_sdr_in_db,si_sdr_out_db,cost_in,cost_out,seconds,pesq,estoi,dnsmos,"
         "message\n";
  auto quote = [](std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  out << std::setprecision(10);
  MetricReport sum_in, sum_out;
  int n_ok = 0;
  for (const auto& r : rows) {
    out << r.id << ',' << to_string(mode) << ',' << (r.ok ? "ok" : "error") << ',';
    if (r.ok) {
      out << r.input.lsd_db << ',' << r.output.lsd_db << ',' << r.input.si_sdr_db << ',' << r.output.si_sdr_db << ','
          << r.input.cost_C << ',' << r.output.cost_C;
      sum_in.lsd_db += r.input.lsd_db;
      sum_out.lsd_db += r.output.lsd_db;
      sum_in.si_sdr_db += r.input.si_sdr_db;
      sum_out.si_sdr_db += r.output.si_sdr_db;
      sum_in.cost_C += r.input.cost_C;
      sum_out.cost_C += r.output.cost_C;
      ++n_ok;
    } else {
      out << ",,,,,";
    }
    out << ',' << std::fixed << std::setprecision(3) << r.seconds << std::defaultfloat << std::setprecision(10)
        << ",,,," << quote(r.message) << '\n';
  }
  if (n_ok > 0) {
    const double n = n_ok;
    out << "mean," << to_string(mode) << ",aggregate," << sum_in.lsd_db / n << ',' << sum_out.lsd_db / n << ','
        << sum_in.si_sdr_db / n << ',' << sum_out.si_sdr_db / n << ',' << sum_in.cost_C / n << ','
        << sum_out.cost_C / n << ",,,,,\"\"\n";
  }
}

}  // namespace derev
