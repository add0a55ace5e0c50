#include <cstring>
#include <iostream>

#include "CLI11.hpp"
#include "mep/cli.hpp"

namespace {

int fail(const std::string& kind, const std::string& message) {
  const int code = mep::exit_code_for(kind);
  const mep::ojson err{{"error", {{"kind", kind}, {"category", mep::category_for(kind)}, {"exit_code", code},
                                  {"message", message}}}};
  std::cerr << err.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mep: polynomial delay-embedding forecasts and predictability regime detection"};
  mep::RunConfig run;
  mep::SynthConfig synth;
  mep::VerifyConfig verify;
  std::string run_config_file;

  try {
    // A --config file seeds the run defaults; explicit flags then override it.
    for (int i = 1; i + 1 < argc; ++i)
      if (std::strcmp(argv[i], "--config") == 0)
        run = mep::run_config_from_json(nlohmann::json::parse(mep::read_file(argv[i + 1])));

    mep::build_cli(app, run, synth, verify, run_config_file);
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      return app.exit(e);
    }

    if (app.got_subcommand("run")) {
      const auto report = mep::cmd_run(run);
      std::cout << "wrote " << run.out << "/report.json (" << report["tracks"].size() << " tracks)\n";
    } else if (app.got_subcommand("synth")) {
      const auto truth = mep::cmd_synth(synth);
      std::cout << "wrote " << synth.out << " and " << mep::truth_path_for(synth.out).string() << '\n';
    } else if (app.got_subcommand("verify")) {
      const auto report = nlohmann::json::parse(mep::read_file(verify.report));
      const auto truth = nlohmann::json::parse(mep::read_file(verify.truth));
      std::cout << mep::cmd_verify(report, truth).dump(2) << '\n';
    }
    return 0;
  } catch (const mep::Error& e) {
    return fail(e.kind(), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail("SchemaMismatch", e.what());
  } catch (const std::exception& e) {
    return fail("Internal", e.what());
  }
}
