// Command-line front end: one subcommand per pipeline stage plus evaluation.
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "qcspharm/error.hpp"
#include "qcspharm/pipeline.hpp"
#include "qcspharm/serialize.hpp"

namespace fs = std::filesystem;

namespace {

int report_error(const std::string& command, const std::string& code, const std::string& message) {
  nlohmann::json j = {{"error", {{"code", code}, {"message", message}, {"command", command}}}};
  std::cerr << j.dump() << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QC-SPHARM shape classification pipeline"};
  app.require_subcommand(1);

  fs::path config_path;
  std::vector<std::string> overrides;
  fs::path run_dir = "run";
  auto add_common = [&](CLI::App* sub, bool needs_run) {
    sub->add_option("-c,--config", config_path, "JSON config file (defaults apply when omitted)");
    sub->add_option("-s,--set", overrides, "config override key=value, dotted keys (repeatable)");
    if (needs_run) sub->add_option("-r,--run", run_dir, "run directory")->capture_default_str();
  };

  fs::path cohort_manifest, out_dir, model_path, features_path, selection_path, out_path;

  auto* synth = app.add_subcommand("synth", "generate a labeled synthetic cohort");
  add_common(synth, false);
  synth->add_option("-o,--out", out_dir, "cohort output directory")->required();

  auto* improve = app.add_subcommand("improve", "smooth, simplify and refine every subject mesh");
  add_common(improve, true);
  improve->add_option("--cohort", cohort_manifest, "cohort manifest.json")->required();

  auto* parametrize = app.add_subcommand("parametrize", "map every improved mesh onto the unit sphere");
  add_common(parametrize, true);
  auto* fit = app.add_subcommand("fit", "fit SPHARM coefficients");
  add_common(fit, true);
  auto* templ = app.add_subcommand("template", "align class +1 subjects and build the mean template");
  add_common(templ, true);
  auto* reg = app.add_subcommand("register", "align every subject to the template and resample on it");
  add_common(reg, true);
  auto* distort = app.add_subcommand("distort", "compute distortion fields against the template");
  add_common(distort, true);
  auto* features = app.add_subcommand("features", "assemble the feature matrix");
  add_common(features, true);
  auto* train = app.add_subcommand("train", "select features on all rows and train the classifier");
  add_common(train, true);

  auto* predict = app.add_subcommand("predict", "label feature rows with a trained model");
  add_common(predict, true);
  predict->add_option("-m,--model", model_path, "model.json (default <run>/model/model.json)");
  predict->add_option("-f,--features", features_path, "feature CSV (default <run>/features/features.csv)");
  predict->add_option("-o,--out", out_path, "write predictions here instead of stdout");

  auto* evaluate = app.add_subcommand("evaluate", "repeated random-split evaluation at one p_cut");
  add_common(evaluate, true);
  auto* sweep = app.add_subcommand("sweep-pcut", "evaluation over the p_cut grid with shared splits");
  add_common(sweep, true);
  auto* export_map = app.add_subcommand("export-map", "color the template by selected vertices");
  add_common(export_map, true);
  export_map->add_option("--selection", selection_path, "selection JSON (default: best sweep selection)");

  auto* show = app.add_subcommand("show-config", "print the effective configuration");
  add_common(show, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("", "UsageError", e.what());
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const auto config = config_path.empty() ? qcs::apply_overrides(qcs::PipelineConfig{}, overrides)
                                            : qcs::load_config(config_path, overrides);
    if (*synth) qcs::stage_synth(config, out_dir);
    else if (*improve) qcs::stage_improve(config, run_dir, cohort_manifest);
    else if (*parametrize) qcs::stage_parametrize(config, run_dir);
    else if (*fit) qcs::stage_fit(config, run_dir);
    else if (*templ) qcs::stage_template(config, run_dir);
    else if (*reg) qcs::stage_register(config, run_dir);
    else if (*distort) qcs::stage_distort(config, run_dir);
    else if (*features) qcs::stage_features(config, run_dir);
    else if (*train) qcs::stage_train(config, run_dir);
    else if (*predict) {
      const auto out = qcs::stage_predict(model_path.empty() ? run_dir / "model" / "model.json" : model_path,
                                          features_path.empty() ? run_dir / "features" / "features.csv" : features_path);
      if (out_path.empty()) std::cout << out.dump(1) << "\n";
      else qcs::write_json(out_path, out);
    } else if (*evaluate) qcs::stage_evaluate(config, run_dir);
    else if (*sweep) qcs::stage_sweep(config, run_dir);
    else if (*export_map) qcs::stage_export_map(config, run_dir, selection_path);
    else if (*show) std::cout << qcs::config_to_json(config).dump(1) << "\n";
  } catch (const qcs::Error& e) {
    return report_error(command, std::string(qcs::to_string(e.code())), e.what());
  } catch (const std::exception& e) {
    return report_error(command, "InternalError", e.what());
  }
  return 0;
}
