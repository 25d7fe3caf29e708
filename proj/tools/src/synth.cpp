// Generates the synthetic fixtures used by the tests and the README walkthrough.
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "histolime/errors.hpp"
#include "histolime_cli/synthetic.hpp"

int main(int argc, char** argv) {
  using namespace histolime;
  CLI::App app{"Synthetic fixtures for histolime", "histolime_synth"};
  app.require_subcommand(1);

  std::string out;
  std::uint64_t seed = 7;
  int normal = 16, oscc = 24, side = 64;
  auto* corpus = app.add_subcommand("corpus", "Write a Normal/OSCC image corpus");
  corpus->add_option("--out", out, "Corpus root")->required();
  corpus->add_option("--normal", normal)->capture_default_str();
  corpus->add_option("--oscc", oscc)->capture_default_str();
  corpus->add_option("--side", side)->capture_default_str();
  corpus->add_option("--seed", seed)->capture_default_str();

  int epochs = 100, best = 74;
  auto* log = app.add_subcommand("log", "Write an epoch log CSV");
  log->add_option("--out", out, "CSV path")->required();
  log->add_option("--epochs", epochs)->capture_default_str();
  log->add_option("--best", best)->capture_default_str();
  log->add_option("--seed", seed)->capture_default_str();

  ConfusionMatrix m{410, 356, 4, 9};
  auto* preds = app.add_subcommand("predictions", "Write a predictions CSV with given counts");
  preds->add_option("--out", out, "CSV path")->required();
  preds->add_option("--tp", m.tp)->capture_default_str();
  preds->add_option("--tn", m.tn)->capture_default_str();
  preds->add_option("--fp", m.fp)->capture_default_str();
  preds->add_option("--fn", m.fn)->capture_default_str();
  preds->add_option("--seed", seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*corpus) {
      synth::write_corpus(out, normal, oscc, seed, side);
    } else {
      if (*log && (best < 1 || best > epochs)) throw std::invalid_argument("--best must lie in [1, epochs]");
      std::ofstream f(out, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write " + out);
      f << (*log ? synth::epoch_log(epochs, best, seed) : synth::predictions_for(m, seed));
    }
  } catch (const std::exception& e) {
    std::cerr << "histolime_synth: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
