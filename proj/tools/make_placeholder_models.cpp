// Writes the placeholder energy models and portfolio used by the defaults:
//   <dir>/models/<class>.json, <dir>/portfolio.json, and with --samples the
//   surrogate samples each model was fitted on (<dir>/samples/<class>.csv).
// Usage: make_placeholder_models [DIR] [--samples]

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "wavebench/wavebench.hpp"

namespace fs = std::filesystem;
using namespace wavebench;

static void write_samples(const fs::path& path, const VehiclePhysics& ph) {
  std::ofstream os(path);
  os << "v,a,rate\n";
  for (const auto& s : surrogate_samples(ph)) {
    os << format_sig6(s.v) << ',' << format_sig6(s.a) << ',' << format_sig6(s.rate) << '\n';
  }
}

int main(int argc, char** argv) {
  fs::path dir = "data";
  bool samples = false;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--samples") {
      samples = true;
    } else {
      dir = arg;
    }
  }
  try {
    fs::create_directories(dir / "models");
    if (samples) fs::create_directories(dir / "samples");
    nlohmann::json portfolio = nlohmann::json::array();
    auto emit = [&](const VehiclePhysics& ph, nlohmann::json share) {
      save_poly_model(placeholder_model(ph), dir / "models" / (ph.class_name + ".json"));
      if (samples) write_samples(dir / "samples" / (ph.class_name + ".csv"), ph);
      portfolio.push_back(
          {{"class_name", ph.class_name}, {"model_file", "models/" + ph.class_name + ".json"}, {"share", share}});
    };
    for (const auto& c : default_human_classes()) emit(c.physics, c.share);
    emit(default_cav_physics(), nullptr);
    std::ofstream(dir / "portfolio.json") << portfolio.dump(2) << '\n';
    std::printf("wrote %zu models to %s\n", portfolio.size(), (dir / "models").string().c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
