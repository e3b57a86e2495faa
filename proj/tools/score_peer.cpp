// Reference score-model peer speaking the wire protocol on stdin/stdout.
// Besides a Gaussian world it can misbehave on purpose, for exercising client error paths.
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "derev/score_protocol.hpp"
#include "json.hpp"

using namespace derev;

namespace {

struct World {
  Waveform mean;  // empty means zero mean of any length
  Waveform variance;
  double scalar_variance = 1.0;
};

World load_world(const std::string& path) {
  World w;
  if (path.empty()) return w;
  std::ifstream f(path);
  if (!f) throw IoError("cannot open world file '" + path + "'");
  const nlohmann::json j = nlohmann::json::parse(f);
  if (j.contains("mean")) {
    const auto m = j.at("mean").get<std::vector<double>>();
    w.mean = Eigen::Map<const Waveform>(m.data(), static_cast<Eigen::Index>(m.size()));
  }
  const auto& v = j.at("variance");
  if (v.is_number()) {
    w.scalar_variance = v.get<double>();
  } else {
    const auto vv = v.get<std::vector<double>>();
    w.variance = Eigen::Map<const Waveform>(vv.data(), static_cast<Eigen::Index>(vv.size()));
  }
  return w;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score-model peer"};
  std::string mode = "gaussian", world_path;
  int fail_after = 0;
  app.add_option("--mode", mode, "gaussian | zeros | wrong-length | crash | hang | bad-magic | error");
  app.add_option("--world", world_path, "JSON with 'mean' (array, optional) and 'variance' (number or array)");
  app.add_option("--after", fail_after, "Serve this many scoring requests normally before misbehaving");
  CLI11_PARSE(app, argc, argv);

  World world;
  try {
    world = load_world(world_path);
  } catch (const std::exception& e) {
    std::cerr << "score peer: " << e.what() << '\n';
    return 2;
  }

  int served = 0;
  protocol::Request req;
  try {
    while (protocol::read_request(STDIN_FILENO, req)) {
      const Eigen::Index n = req.x.size();
      const bool handshake = n == 0;
      const bool misbehave = !handshake && mode != "gaussian" && mode != "zeros" && served >= fail_after;
      if (misbehave) {
        if (mode == "crash") std::_Exit(7);
        if (mode == "hang") {
          for (;;) std::this_thread::sleep_for(std::chrono::seconds(60));
        }
        if (mode == "bad-magic") {
          protocol::write_all(STDOUT_FILENO, {'N', 'O', 'P', 'E', 0, 0, 0, 0});
          continue;
        }
        if (mode == "error") {
          protocol::write_all(STDOUT_FILENO, protocol::encode_error(42));
          continue;
        }
        if (mode == "wrong-length") {
          protocol::write_all(STDOUT_FILENO, protocol::encode_response(Waveform::Zero(n + 1)));
          continue;
        }
      }
      Waveform s = Waveform::Zero(n);
      if (mode != "zeros" && n > 0) {
        const Waveform mean = world.mean.size() == 0 ? Waveform::Zero(n) : world.mean;
        const Waveform var = world.variance.size() == 0 ? Waveform::Constant(n, world.scalar_variance) : world.variance;
        if (mean.size() != n || var.size() != n) {
          protocol::write_all(STDOUT_FILENO, protocol::encode_error(2));
          continue;
        }
        s = -((req.x - mean).array() / (var.array() + req.sigma * req.sigma)).matrix();
      }
      if (!protocol::write_all(STDOUT_FILENO, protocol::encode_response(s))) return 1;
      if (!handshake) ++served;
    }
  } catch (const std::exception& e) {
    std::cerr << "score peer: " << e.what() << '\n';
    protocol::write_all(STDOUT_FILENO, protocol::encode_error(1));
    return 1;
  }
  return 0;
}
