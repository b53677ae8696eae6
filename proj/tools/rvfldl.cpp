// rvfldl: command-line front end.
//
//   rvfldl <train|classify|reconstruct|eval|sweep> --config run.json
//          [--seed N] [--threads N] [--out DIR]
//
// Exit codes: 0 success, 1 internal error, 2 usage/config error, 3 data error.
// Failures print one JSON object on one line to stderr.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "commands.hpp"

namespace {

int fail(int code, const char* kind, const std::string& message) {
  nlohmann::ordered_json e;
  e["error"] = {{"exit_code", code}, {"kind", kind}, {"message", message}};
  std::cerr << e.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace rvfldl;
  CLI::App app{"Random-vector-functional-link dictionary learning"};
  std::string verb;
  std::string config_path;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string out_dir;
  app.add_option("verb", verb, "train | classify | reconstruct | eval | sweep")
      ->required()
      ->check(CLI::IsMember({"train", "classify", "reconstruct", "eval", "sweep"}));
  app.add_option("--config", config_path, "JSON run configuration")->required();
  auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides config.model.seed)");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads for (fold, run) jobs")
                          ->check(CLI::PositiveNumber);
  auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides config.output.dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "usage", e.what());
  }

  try {
    cli::Context ctx;
    ctx.verb = verb;
    ctx.cfg = cli::load_run_config(config_path);
    if (*seed_opt) ctx.cfg.train.master_seed = seed;
    if (*threads_opt) ctx.cfg.threads = threads;
    if (*out_opt) ctx.cfg.out_dir = out_dir;
    if (verb != "train") {
      // a training config may be reused as-is by the later verbs
      if (ctx.cfg.task.empty() || ctx.cfg.task.rfind("train-", 0) == 0) ctx.cfg.task = verb;
      if (ctx.cfg.task != verb) {
        throw ConfigError("config.task '" + ctx.cfg.task + "' does not match verb '" + verb + "'");
      }
    }

    int code = 0;
    if (verb == "train") code = cli::cmd_train(ctx);
    else if (verb == "classify") code = cli::cmd_classify(ctx);
    else if (verb == "reconstruct") code = cli::cmd_reconstruct(ctx);
    else if (verb == "eval") code = cli::cmd_eval(ctx);
    else code = cli::cmd_sweep(ctx);
    cli::write_metadata(ctx);
    return code;
  } catch (const ConfigError& e) {
    return fail(2, "config", e.what());
  } catch (const DataError& e) {
    return fail(3, to_string(e.kind()), e.what());
  } catch (const DimensionError& e) {
    return fail(3, "dimension", e.what());
  } catch (const NumericalError& e) {
    return fail(1, "numerical", e.what());
  } catch (const std::exception& e) {
    return fail(1, "internal", e.what());
  }
}
