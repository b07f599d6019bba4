#include <chrono>
#include <cstdio>
#include <exception>
#include <functional>
#include <vector>

#include "CLI11.hpp"
#include "common.hpp"
#include "hei/model/train.hpp"

namespace acceptance {

Surrogate train_surrogate() {
  Surrogate s;
  s.split = hei::model::split_dataset(hei::model::synth_dataset(7, 50), 0.8, 7);
  hei::model::TrainOptions opt;
  opt.epochs = 30;
  opt.seed = 3;
  s.weights = hei::model::train(s.split.train, s.cfg, opt).weights;
  return s;
}

}  // namespace acceptance

int main(int argc, char** argv) {
  using namespace acceptance;
  struct Entry {
    const char* title;
    std::function<Outcome()> run;
  };
  const std::vector<Entry> entries = {
      {"HE primitive oracle", criterion_1},
      {"encrypted convolution equivalence", criterion_2},
      {"diagonal dense equivalence", criterion_3},
      {"im2col golden vectors", criterion_4},
      {"Chebyshev suite", criterion_5},
      {"end-to-end argmax agreement", criterion_6},
      {"accuracy gap", criterion_7},
      {"ring-dimension sweep", criterion_8},
      {"protocol robustness", criterion_9},
      {"server blindness", criterion_10},
  };

  CLI::App app{"acceptance criteria"};
  std::vector<int> selected;
  app.add_option("--criterion,-c", selected, "criterion numbers to run (default: all)")
      ->check(CLI::Range(1, static_cast<int>(entries.size())));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty())
    for (int i = 1; i <= static_cast<int>(entries.size()); ++i) selected.push_back(i);

  bool all = true;
  for (int n : selected) {
    const auto& e = entries[static_cast<std::size_t>(n - 1)];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = e.run();
    } catch (const std::exception& ex) {
      o.check(false, std::string("uncaught exception: ") + ex.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d %s: %s (%.1f s)\n", n, o.pass ? "PASS" : "FAIL", e.title, secs);
    for (const auto& note : o.notes) std::printf("    %s\n", note.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
