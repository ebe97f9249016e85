#include <iostream>

#include <CLI11.hpp>

#include "ggen/cli.hpp"
#include "ggen/dataset.hpp"

int main(int argc, char** argv) {
  CLI::App app{"synthesize a small deterministic gesture corpus"};
  ggen::ToyCorpusSpec spec;
  std::string out_dir;
  std::uint64_t seed = 7;
  app.add_option("--out", out_dir, "corpus output directory")->required();
  app.add_option("--clips", spec.clips, "number of clips (default 6)");
  app.add_option("--seconds", spec.seconds, "clip length in seconds (default 12)");
  app.add_option("--joints", spec.joint_count, "skeleton joint count (default 75)");
  app.add_option("--fps", spec.fps, "motion frame rate (default 20)");
  app.add_option("--seed", seed, "corpus seed (default 7)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  return ggen::guard_command(
      [&] {
        ggen::synthesize_toy_corpus(out_dir, spec, seed);
        std::cout << "wrote " << spec.clips << " clips (" << spec.seconds << " s, "
                  << spec.joint_count << " joints, " << spec.fps << " fps) -> " << out_dir
                  << "\n";
        return 0;
      },
      std::cerr);
}
