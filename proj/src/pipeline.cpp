#include "qcspharm/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "qcspharm/error.hpp"
#include "qcspharm/serialize.hpp"
#include "qcspharm/sphere_sampling.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace qcs {

namespace {

template <class F>
auto for_subject(const std::string& id, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), "subject " + id + ": " + e.what());
  }
}

json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
json mat_json(const Mat3& m) {
  return {{m(0, 0), m(0, 1), m(0, 2)}, {m(1, 0), m(1, 1), m(1, 2)}, {m(2, 0), m(2, 1), m(2, 2)}};
}
Vec3 json_vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
Mat3 json_mat(const json& j) {
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

// Rejects keys absent from the defaults so that typos do not pass silently.
void check_keys(const json& given, const json& defaults, const std::string& prefix) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string key = prefix + it.key();
    if (!defaults.contains(it.key())) fail(ErrorCode::InvalidParameter, "unknown config key '" + key + "'");
    const auto& d = defaults.at(it.key());
    if (d.is_object()) {
      if (!it->is_object()) fail(ErrorCode::InvalidParameter, "config key '" + key + "' must be an object");
      check_keys(*it, d, key + ".");
    }
  }
}

std::string kernel_scale_name(KernelScale k) { return k == KernelScale::None ? "none" : "dimension"; }
KernelScale parse_kernel_scale(const std::string& s) {
  if (s == "none") return KernelScale::None;
  if (s == "dimension") return KernelScale::Dimension;
  fail(ErrorCode::InvalidParameter, "kernel_scale must be 'none' or 'dimension'");
}

// ---- run-directory bookkeeping ----

struct SubjectRef {
  std::string id;
  int label = 1;
};

std::vector<SubjectRef> run_subjects(const fs::path& run) {
  const auto j = read_json(run / "subjects.json");
  std::vector<SubjectRef> out;
  for (const auto& s : j.at("subjects")) out.push_back({s.at("id").get<std::string>(), s.at("label").get<int>()});
  return out;
}

std::string rel(const fs::path& run, const fs::path& p) { return fs::relative(p, run).generic_string(); }

void record_stage(const fs::path& run, const std::string& stage, const PipelineConfig& config,
                  const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  const fs::path manifest = run / "manifest.json";
  json m = fs::exists(manifest) ? read_json(manifest) : json::object();
  json entry;
  entry["config_sha256"] = sha256_hex(config_to_json(config).dump());
  entry["inputs"] = json::object();
  for (const auto& p : inputs) entry["inputs"][rel(run, p)] = sha256_file(p);
  entry["outputs"] = json::object();
  for (const auto& p : outputs) entry["outputs"][rel(run, p)] = sha256_file(p);
  m["stages"][stage] = entry;
  write_json(manifest, m);
}

TemplateSphere read_sphere(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MissingArtifact, "missing template sphere " + path.string());
  const auto mesh = read_off(in);
  TemplateSphere s;
  s.points = mesh.vertices();
  s.faces = mesh.shared_faces();
  return s;
}

SpharmCoefficients read_coeffs(const fs::path& path) { return coefficients_from_json(read_text(path)); }

std::vector<double> read_shape_column(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  std::vector<double> e;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    e.push_back(std::stod(line.substr(comma + 1)));
  }
  return e;
}

MeanTemplate read_mean(const fs::path& run, const TemplateSphere& sphere) {
  MeanTemplate m;
  m.mean = read_coeffs(run / "template" / "mean_coeffs.json");
  m.mesh = register_subject(m.mean, sphere);
  return m;
}

json alignment_json(const std::string& id, const Mat3& object, const Mat3& param, const Vec3& t, double rmsd) {
  return {{"id", id}, {"object_rotation", mat_json(object)}, {"param_rotation", mat_json(param)},
          {"translation", vec_json(t)}, {"rmsd", rmsd}};
}

}  // namespace

// ---- configuration ----

EvalOptions PipelineConfig::eval_options() const {
  EvalOptions o;
  o.method = method;
  o.train_per_class = train_per_class;
  o.test_per_class = test_per_class;
  o.repetitions = repetitions;
  o.seed = seed;
  o.svm = svm;
  return o;
}

void PipelineConfig::validate() const {
  require(L >= 1, ErrorCode::InvalidParameter, "L must be >= 1");
  require(template_kind == "fibonacci" || template_kind == "icosphere", ErrorCode::InvalidParameter,
          "template.kind must be 'fibonacci' or 'icosphere'");
  const int n = template_kind == "fibonacci" ? N : 10 * (1 << (2 * icosphere_level)) + 2;
  require(template_kind != "fibonacci" || N >= 12, ErrorCode::InvalidParameter, "N must be >= 12");
  require(n >= coeff_count(L), ErrorCode::InvalidParameter,
          "template vertex count must be >= (L+1)^2 = " + std::to_string(coeff_count(L)));
  require(align_samples >= 3, ErrorCode::InvalidParameter, "template.align_samples must be >= 3");
  require(mean.iterations >= 1 && mean.search_depth >= 0 && mean.tolerance > 0, ErrorCode::InvalidParameter,
          "template iterations >= 1, search_depth >= 0 and tolerance > 0 required");
  require(param_iterations >= 0 && param_tolerance > 0, ErrorCode::InvalidParameter, "invalid param settings");
  require(weights.alpha > 0 && weights.beta > 0 && weights.gamma > 0, ErrorCode::InvalidParameter,
          "weights must be positive");
  require(svm.eta > 0 && svm.C > 0 && svm.tolerance > 0 && svm.max_iterations > 0, ErrorCode::InvalidParameter,
          "svm eta, C, tolerance and max_iterations must be positive");
  require(p_cut > 0 && p_cut < 1, ErrorCode::InvalidParameter, "p_cut must lie in (0, 1)");
  require(!p_cut_grid.empty(), ErrorCode::InvalidParameter, "p_cut_grid must be nonempty");
  for (double p : p_cut_grid) require(p > 0 && p < 1, ErrorCode::InvalidParameter, "p_cut_grid values must lie in (0, 1)");
  require(train_per_class >= 3 && test_per_class >= 1, ErrorCode::InvalidParameter,
          "splits need >= 3 training and >= 1 test rows per class");
  require(repetitions >= 1, ErrorCode::InvalidParameter, "repetitions must be >= 1");
  require(export_repetition >= 0 && export_repetition < repetitions, ErrorCode::InvalidParameter,
          "export_repetition must index a repetition");
  synth.validate();
}

json config_to_json(const PipelineConfig& c) {
  json j;
  j["L"] = c.L;
  j["N"] = c.N;
  j["template"] = {{"kind", c.template_kind},          {"icosphere_level", c.icosphere_level},
                   {"iterations", c.mean.iterations},   {"search_depth", c.mean.search_depth},
                   {"tolerance", c.mean.tolerance},     {"align_samples", c.align_samples}};
  j["improve"] = {{"enabled", c.improve_enabled},
                  {"smooth_iterations", c.improve.smooth_iterations},
                  {"smooth_step", c.improve.smooth_step},
                  {"simplify_target", c.improve.simplify_target},
                  {"refine_passes", c.improve.refine_passes}};
  j["param"] = {{"max_iterations", c.param_iterations}, {"tolerance", c.param_tolerance}};
  j["fit"] = {{"max_condition", c.max_condition}};
  j["weights"] = {{"alpha", c.weights.alpha}, {"beta", c.weights.beta}, {"gamma", c.weights.gamma}};
  j["svm"] = {{"eta", c.svm.eta},
              {"C", c.svm.C},
              {"tolerance", c.svm.tolerance},
              {"max_iterations", c.svm.max_iterations},
              {"kernel_scale", kernel_scale_name(c.svm.kernel_scale)}};
  j["p_cut"] = c.p_cut;
  j["p_cut_grid"] = c.p_cut_grid;
  j["splits"] = {{"train_per_class", c.train_per_class}, {"test_per_class", c.test_per_class}};
  j["repetitions"] = c.repetitions;
  j["method"] = method_name(c.method);
  j["seed"] = c.seed;
  j["export_repetition"] = c.export_repetition;
  const auto& s = c.synth;
  j["synth"] = {{"subjects_per_class", s.subjects_per_class},
                {"axes", vec_json(s.axes)},
                {"bump_center", vec_json(s.bump_center)},
                {"bump_radius", s.bump_radius},
                {"amplitude", s.amplitude},
                {"volume_scale", s.volume_scale},
                {"noise_std", s.noise_std},
                {"noise_degree", s.noise_degree},
                {"vertex_count", s.vertex_count},
                {"seed", s.seed}};
  return j;
}

PipelineConfig config_from_json(const json& given) {
  const json defaults = config_to_json(PipelineConfig{});
  require(given.is_object(), ErrorCode::InvalidParameter, "config must be a JSON object");
  check_keys(given, defaults, "");
  json j = defaults;
  j.merge_patch(given);
  try {
    PipelineConfig c;
    c.L = j["L"].get<int>();
    c.N = j["N"].get<int>();
    const auto& t = j["template"];
    c.template_kind = t["kind"].get<std::string>();
    c.icosphere_level = t["icosphere_level"].get<int>();
    c.mean.iterations = t["iterations"].get<int>();
    c.mean.search_depth = t["search_depth"].get<int>();
    c.mean.tolerance = t["tolerance"].get<double>();
    c.align_samples = t["align_samples"].get<int>();
    const auto& im = j["improve"];
    c.improve_enabled = im["enabled"].get<bool>();
    c.improve.smooth_iterations = im["smooth_iterations"].get<int>();
    c.improve.smooth_step = im["smooth_step"].get<double>();
    c.improve.simplify_target = im["simplify_target"].get<int>();
    c.improve.refine_passes = im["refine_passes"].get<int>();
    c.param_iterations = j["param"]["max_iterations"].get<int>();
    c.param_tolerance = j["param"]["tolerance"].get<double>();
    c.max_condition = j["fit"]["max_condition"].get<double>();
    c.weights.alpha = j["weights"]["alpha"].get<double>();
    c.weights.beta = j["weights"]["beta"].get<double>();
    c.weights.gamma = j["weights"]["gamma"].get<double>();
    const auto& sv = j["svm"];
    c.svm.eta = sv["eta"].get<double>();
    c.svm.C = sv["C"].get<double>();
    c.svm.tolerance = sv["tolerance"].get<double>();
    c.svm.max_iterations = sv["max_iterations"].get<long>();
    c.svm.kernel_scale = parse_kernel_scale(sv["kernel_scale"].get<std::string>());
    c.p_cut = j["p_cut"].get<double>();
    c.p_cut_grid = j["p_cut_grid"].get<std::vector<double>>();
    c.train_per_class = j["splits"]["train_per_class"].get<int>();
    c.test_per_class = j["splits"]["test_per_class"].get<int>();
    c.repetitions = j["repetitions"].get<int>();
    c.method = parse_method(j["method"].get<std::string>());
    c.seed = j["seed"].get<std::uint64_t>();
    c.export_repetition = j["export_repetition"].get<int>();
    const auto& s = j["synth"];
    c.synth.subjects_per_class = s["subjects_per_class"].get<int>();
    c.synth.axes = json_vec(s["axes"]);
    c.synth.bump_center = json_vec(s["bump_center"]);
    c.synth.bump_radius = s["bump_radius"].get<double>();
    c.synth.amplitude = s["amplitude"].get<double>();
    c.synth.volume_scale = s["volume_scale"].get<double>();
    c.synth.noise_std = s["noise_std"].get<double>();
    c.synth.noise_degree = s["noise_degree"].get<int>();
    c.synth.vertex_count = s["vertex_count"].get<int>();
    c.synth.seed = s["seed"].get<std::uint64_t>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidParameter, std::string("config value has the wrong type: ") + e.what());
  }
}

PipelineConfig apply_overrides(const PipelineConfig& base, const std::vector<std::string>& overrides) {
  json j = config_to_json(base);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    require(eq != std::string::npos && eq > 0, ErrorCode::InvalidParameter, "override must be key=value: " + o);
    std::string key = o.substr(0, eq);
    const std::string raw = o.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    std::string pointer = "/";
    for (char ch : key) pointer += ch == '.' ? '/' : ch;
    const json::json_pointer ptr(pointer);
    require(j.contains(ptr), ErrorCode::InvalidParameter, "unknown config key '" + key + "'");
    j[ptr] = value;
  }
  return config_from_json(j);
}

PipelineConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  return apply_overrides(config_from_json(read_json(path)), overrides);
}

// ---- in-memory pipeline ----

TriangleMesh improve_stage(const TriangleMesh& mesh, const PipelineConfig& config) {
  require_genus0(mesh);
  return config.improve_enabled ? improve_mesh(mesh, config.improve) : mesh;
}

PreparedSubject prepare_subject(const SubjectInput& input, const PipelineConfig& config) {
  return for_subject(input.id, [&] {
    PreparedSubject s;
    s.id = input.id;
    s.label = input.label;
    s.mesh = improve_stage(input.mesh, config);
    s.param = parametrize_sphere(s.mesh, config.param_iterations, config.param_tolerance);
    s.fit = fit_coefficients(s.mesh, s.param.param, config.L, config.max_condition);
    return s;
  });
}

TemplateSphere make_template_sphere(const PipelineConfig& config) {
  return config.template_kind == "icosphere" ? icosphere_template(config.icosphere_level)
                                             : build_template_sphere(config.N);
}

AlignmentWorkspace make_workspace(const PipelineConfig& config, const TemplateSphere& sphere) {
  return AlignmentWorkspace(config.L, fibonacci_sphere(config.align_samples), sphere.points);
}

MeasuredSubject measure_subject(const SpharmCoefficients& coeffs, const MeanTemplate& mean,
                                const Curvatures& mean_curvatures, const TemplateSphere& sphere,
                                const AlignmentWorkspace& workspace, const PipelineConfig& config) {
  MeasuredSubject m;
  m.alignment = align_subject(coeffs, mean, config.mean.search_depth, workspace);
  m.registered = register_subject(m.alignment.coeffs, sphere);
  m.field = shape_index(mean.mesh, mean_curvatures, m.registered, config.weights);
  m.volume = volume_distortion(mean.mesh, m.registered);
  const FeatureSchema schema{sphere.size(), config.L};
  m.features = assemble_feature_vector(m.field.shape_index, m.alignment.coeffs, m.volume, schema);
  return m;
}

CohortRun run_pipeline(const std::vector<SubjectInput>& inputs, const PipelineConfig& config) {
  config.validate();
  CohortRun run;
  for (const auto& in : inputs) run.subjects.push_back(prepare_subject(in, config));
  run.sphere = make_template_sphere(config);
  const auto ws = make_workspace(config, run.sphere);
  std::vector<SpharmCoefficients> nc;
  for (const auto& s : run.subjects) {
    if (s.label == 1) nc.push_back(s.fit.coeffs);
  }
  run.mean = build_mean_surface(nc, run.sphere, ws, config.mean);
  const auto curv = curvatures(run.mean.mesh);
  const FeatureSchema schema{run.sphere.size(), config.L};
  run.matrix.schema = schema;
  run.matrix.data.resize(static_cast<Eigen::Index>(run.subjects.size()), schema.width());
  for (size_t i = 0; i < run.subjects.size(); ++i) {
    const auto& s = run.subjects[i];
    const auto m = for_subject(s.id, [&] { return measure_subject(s.fit.coeffs, run.mean, curv, run.sphere, ws, config); });
    run.matrix.data.row(static_cast<Eigen::Index>(i)) = m.features.transpose();
    run.alignments.push_back({m.alignment.object_rotation, m.alignment.param_rotation, m.alignment.translation,
                              m.alignment.rmsd, false});
    run.registered.push_back(m.registered);
    run.matrix.labels.push_back(s.label);
    run.matrix.ids.push_back(s.id);
  }
  return run;
}

std::vector<int> template_truth_mask(const std::vector<TriangleMesh>& registered,
                                     const std::vector<SubjectAlignment>& alignments,
                                     const std::vector<Mat3>& generation_rotations, const GroundTruth& truth) {
  require(registered.size() == alignments.size() && registered.size() == generation_rotations.size(),
          ErrorCode::LengthMismatch, "one alignment and generation rotation per registered subject required");
  if (truth.amplitude <= 0 || registered.empty()) return {};
  const int n = registered.front().vertex_count();
  std::vector<int> hits(static_cast<size_t>(n), 0);
  for (size_t s = 0; s < registered.size(); ++s) {
    require(registered[s].vertex_count() == n, ErrorCode::LengthMismatch, "registered meshes differ in size");
    const auto& a = alignments[s];
    const Mat3 back = generation_rotations[s].transpose() * a.object_rotation.transpose();
    std::vector<Vec3> dirs;
    dirs.reserve(static_cast<size_t>(n));
    for (const auto& p : registered[s].vertices()) dirs.push_back(back * (p - a.translation));
    for (int i : cap_mask(dirs, truth.bump_center, truth.bump_radius)) ++hits[static_cast<size_t>(i)];
  }
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    if (2 * hits[static_cast<size_t>(i)] >= static_cast<int>(registered.size())) out.push_back(i);
  }
  return out;
}

// ---- on-disk stages ----

void write_cohort(const Cohort& cohort, const CohortSpec& spec, const fs::path& dir) {
  json subjects = json::array();
  for (const auto& s : cohort.subjects) {
    const std::string file = s.id + ".off";
    save_off(s.mesh, dir / file);
    subjects.push_back({{"id", s.id}, {"label", s.label}, {"seed", s.seed}, {"file", file},
                        {"rotation", mat_json(s.rotation)}});
  }
  PipelineConfig tmp;
  tmp.synth = spec;
  json m;
  m["spec"] = config_to_json(tmp)["synth"];
  m["subjects"] = subjects;
  m["truth"] = {{"bump_center", vec_json(cohort.truth.bump_center)},
                {"bump_radius", cohort.truth.bump_radius},
                {"amplitude", cohort.truth.amplitude},
                {"volume_ratio", cohort.truth.volume_ratio}};
  write_json(dir / "manifest.json", m);
}

std::vector<SubjectInput> read_cohort(const fs::path& manifest) {
  const auto j = read_json(manifest);
  std::vector<SubjectInput> out;
  try {
    for (const auto& s : j.at("subjects")) {
      SubjectInput in;
      in.id = s.at("id").get<std::string>();
      in.label = s.at("label").get<int>();
      require(in.label == 1 || in.label == -1, ErrorCode::InvalidParameter, "labels must be +1 or -1");
      fs::path file = s.at("file").get<std::string>();
      if (file.is_relative()) file = manifest.parent_path() / file;
      in.mesh = for_subject(in.id, [&] { return load_mesh(file); });
      out.push_back(std::move(in));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, "malformed cohort manifest: " + std::string(e.what()));
  }
  require(!out.empty(), ErrorCode::TooFewSubjects, "cohort manifest lists no subjects");
  return out;
}

void stage_synth(const PipelineConfig& config, const fs::path& out_dir) {
  const auto cohort = generate_cohort(config.synth);
  write_cohort(cohort, config.synth, out_dir);
}

void stage_improve(const PipelineConfig& config, const fs::path& run, const fs::path& cohort_manifest) {
  const auto inputs = read_cohort(cohort_manifest);
  const auto manifest = read_json(cohort_manifest);
  std::vector<fs::path> in_files{cohort_manifest}, outputs;
  json subjects = json::array();
  for (const auto& s : inputs) {
    const auto improved = for_subject(s.id, [&] { return improve_stage(s.mesh, config); });
    const auto path = run / "improved" / (s.id + ".off");
    save_off(improved, path);
    outputs.push_back(path);
    subjects.push_back({{"id", s.id}, {"label", s.label}});
  }
  json listing;
  listing["subjects"] = subjects;
  if (manifest.contains("truth")) {
    listing["truth"] = manifest["truth"];
    for (const auto& s : manifest.at("subjects")) {
      if (s.contains("rotation")) listing["rotations"][s.at("id").get<std::string>()] = s.at("rotation");
    }
  }
  write_json(run / "subjects.json", listing);
  outputs.push_back(run / "subjects.json");
  record_stage(run, "improve", config, in_files, outputs);
}

void stage_parametrize(const PipelineConfig& config, const fs::path& run) {
  std::vector<fs::path> inputs, outputs;
  json summary = json::object();
  for (const auto& s : run_subjects(run)) {
    const auto in = run / "improved" / (s.id + ".off");
    const auto mesh = for_subject(s.id, [&] { return load_mesh(in); });
    const auto r = for_subject(s.id, [&] { return parametrize_sphere(mesh, config.param_iterations, config.param_tolerance); });
    const auto out = run / "param" / (s.id + ".json");
    write_text(out, param_to_json(r.param));
    summary[s.id] = {{"iterations", r.iterations},
                     {"unfold_iterations", r.unfold_iterations},
                     {"converged", r.converged},
                     {"area_distortion", r.distortion_history.back()}};
    inputs.push_back(in);
    outputs.push_back(out);
  }
  write_json(run / "param" / "summary.json", summary);
  outputs.push_back(run / "param" / "summary.json");
  record_stage(run, "parametrize", config, inputs, outputs);
}

void stage_fit(const PipelineConfig& config, const fs::path& run) {
  std::vector<fs::path> inputs, outputs;
  json summary = json::object();
  for (const auto& s : run_subjects(run)) {
    const auto mesh_path = run / "improved" / (s.id + ".off");
    const auto param_path = run / "param" / (s.id + ".json");
    const auto fit = for_subject(s.id, [&] {
      const auto mesh = load_mesh(mesh_path);
      const auto param = param_from_json(read_text(param_path));
      return fit_coefficients(mesh, param, config.L, config.max_condition);
    });
    const auto out = run / "coeffs" / (s.id + ".json");
    write_text(out, coefficients_to_json(fit.coeffs));
    summary[s.id] = {{"residual_rms", fit.residual_rms}, {"condition_estimate", fit.condition_estimate}};
    inputs.push_back(mesh_path);
    inputs.push_back(param_path);
    outputs.push_back(out);
  }
  write_json(run / "coeffs" / "summary.json", summary);
  outputs.push_back(run / "coeffs" / "summary.json");
  record_stage(run, "fit", config, inputs, outputs);
}

void stage_template(const PipelineConfig& config, const fs::path& run) {
  std::vector<fs::path> inputs;
  std::vector<SpharmCoefficients> nc;
  std::vector<std::string> ids;
  for (const auto& s : run_subjects(run)) {
    if (s.label != 1) continue;
    const auto p = run / "coeffs" / (s.id + ".json");
    nc.push_back(for_subject(s.id, [&] { return read_coeffs(p); }));
    ids.push_back(s.id);
    inputs.push_back(p);
  }
  require(!nc.empty(), ErrorCode::TooFewSubjects, "template needs at least one class +1 subject");
  const auto sphere = make_template_sphere(config);
  const auto ws = make_workspace(config, sphere);
  const auto mean = build_mean_surface(nc, sphere, ws, config.mean);

  const fs::path dir = run / "template";
  write_text(dir / "mean_coeffs.json", coefficients_to_json(mean.mean));
  save_off(sphere.mesh(), dir / "sphere.off");
  save_off(mean.mesh, dir / "mean.off");
  json log;
  log["iterations"] = mean.iterations;
  log["converged"] = mean.converged;
  log["reference"] = ids[static_cast<size_t>(mean.reference)];
  log["subjects"] = json::array();
  for (size_t i = 0; i < nc.size(); ++i) {
    const auto& a = mean.alignments[i];
    auto entry = alignment_json(ids[i], a.object_rotation, a.param_rotation, a.translation, a.rmsd);
    entry["degenerate_foe"] = a.degenerate_foe;
    log["subjects"].push_back(entry);
  }
  write_json(dir / "alignments.json", log);
  record_stage(run, "template", config, inputs,
               {dir / "mean_coeffs.json", dir / "sphere.off", dir / "mean.off", dir / "alignments.json"});
}

void stage_register(const PipelineConfig& config, const fs::path& run) {
  const auto sphere = read_sphere(run / "template" / "sphere.off");
  const auto mean = read_mean(run, sphere);
  require(mean.mean.degree_cap() == config.L, ErrorCode::SchemaMismatch, "template degree differs from config L");
  const auto ws = make_workspace(config, sphere);
  std::vector<fs::path> inputs{run / "template" / "sphere.off", run / "template" / "mean_coeffs.json"}, outputs;
  json log = json::array();
  for (const auto& s : run_subjects(run)) {
    const auto p = run / "coeffs" / (s.id + ".json");
    const auto a = for_subject(s.id, [&] { return align_subject(read_coeffs(p), mean, config.mean.search_depth, ws); });
    const auto mesh = for_subject(s.id, [&] { return register_subject(a.coeffs, sphere); });
    const auto coeff_out = run / "aligned" / (s.id + ".json");
    const auto mesh_out = run / "registered" / (s.id + ".off");
    write_text(coeff_out, coefficients_to_json(a.coeffs));
    save_off(mesh, mesh_out);
    log.push_back(alignment_json(s.id, a.object_rotation, a.param_rotation, a.translation, a.rmsd));
    inputs.push_back(p);
    outputs.push_back(coeff_out);
    outputs.push_back(mesh_out);
  }
  write_json(run / "registered" / "alignments.json", log);
  outputs.push_back(run / "registered" / "alignments.json");
  record_stage(run, "register", config, inputs, outputs);
}

void stage_distort(const PipelineConfig& config, const fs::path& run) {
  const auto mean_path = run / "template" / "mean.off";
  const auto mean_mesh = load_mesh(mean_path);
  const auto curv = curvatures(mean_mesh);
  std::vector<fs::path> inputs{mean_path}, outputs;
  json volumes = json::object();
  for (const auto& s : run_subjects(run)) {
    const auto in = run / "registered" / (s.id + ".off");
    const auto [field, volume] = for_subject(s.id, [&] {
      const auto mesh = load_mesh(in);
      return std::make_pair(shape_index(mean_mesh, curv, mesh, config.weights), volume_distortion(mean_mesh, mesh));
    });
    const auto out = run / "distortion" / (s.id + ".csv");
    write_text(out, distortion_to_csv(field));
    volumes[s.id] = volume;
    inputs.push_back(in);
    outputs.push_back(out);
  }
  write_json(run / "distortion" / "volumes.json", volumes);
  outputs.push_back(run / "distortion" / "volumes.json");
  record_stage(run, "distort", config, inputs, outputs);
}

void stage_features(const PipelineConfig& config, const fs::path& run) {
  const auto volumes = read_json(run / "distortion" / "volumes.json");
  const auto subjects = run_subjects(run);
  FeatureMatrix m;
  std::vector<fs::path> inputs{run / "distortion" / "volumes.json"};
  for (size_t i = 0; i < subjects.size(); ++i) {
    const auto& s = subjects[i];
    const auto dpath = run / "distortion" / (s.id + ".csv");
    const auto cpath = run / "aligned" / (s.id + ".json");
    const auto row = for_subject(s.id, [&] {
      const auto e = read_shape_column(dpath);
      const auto c = read_coeffs(cpath);
      require(volumes.contains(s.id), ErrorCode::MissingArtifact, "no volume distortion recorded");
      const FeatureSchema schema{static_cast<int>(e.size()), c.degree_cap()};
      if (i == 0) m.schema = schema;
      require(schema == m.schema, ErrorCode::SchemaMismatch, "feature schema differs from the first subject");
      return assemble_feature_vector(e, c, volumes.at(s.id).get<double>(), schema);
    });
    if (i == 0) m.data.resize(static_cast<Eigen::Index>(subjects.size()), m.schema.width());
    m.data.row(static_cast<Eigen::Index>(i)) = row.transpose();
    m.labels.push_back(s.label);
    m.ids.push_back(s.id);
    inputs.push_back(dpath);
    inputs.push_back(cpath);
  }
  const auto out = run / "features" / "features.csv";
  write_text(out, feature_matrix_to_csv(m));
  record_stage(run, "features", config, inputs, {out});
}

void stage_train(const PipelineConfig& config, const fs::path& run) {
  const auto in = run / "features" / "features.csv";
  const auto m = feature_matrix_from_csv(read_text(in));
  std::vector<int> all(static_cast<size_t>(m.rows()));
  for (int i = 0; i < m.rows(); ++i) all[i] = i;
  const auto cols = method_columns(m.schema, config.method);
  std::vector<double> p(static_cast<size_t>(m.cols()), 1.0);
  if (config.method == Method::Volume) {
    p[m.schema.volume_column()] = 0.0;
  } else {
    const auto pm = training_pvalues(m, all, config.method);
    for (size_t k = 0; k < cols.size(); ++k) p[cols[k]] = pm[k];
  }
  auto selection = select_features(p, config.p_cut);
  if (config.method == Method::Volume) selection.omega = cols;
  auto model = train_classifier(m.data, m.labels, selection.omega, config.svm);
  model.schema_tag = m.schema.tag();
  const auto model_out = run / "model" / "model.json";
  const auto sel_out = run / "model" / "selection.json";
  write_text(model_out, model_to_json(model));
  write_json(sel_out, selection_to_json(selection));
  record_stage(run, "train", config, {in}, {model_out, sel_out});
}

json stage_predict(const fs::path& model_path, const fs::path& features) {
  const auto model = model_from_json(read_text(model_path));
  const auto m = feature_matrix_from_csv(read_text(features));
  require(model.schema_tag.empty() || model.schema_tag == m.schema.tag(), ErrorCode::SchemaMismatch,
          "feature schema " + m.schema.tag() + " does not match model schema " + model.schema_tag);
  json out = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    const auto p = predict(model, m.data.row(i).transpose());
    out.push_back({{"id", m.ids[i]}, {"label", p.label}, {"decision", p.decision}});
  }
  return {{"predictions", out}};
}

void stage_evaluate(const PipelineConfig& config, const fs::path& run) {
  const auto in = run / "features" / "features.csv";
  const auto m = feature_matrix_from_csv(read_text(in));
  const auto report = evaluate(m, config.p_cut, config.eval_options());
  const auto out = run / "eval" / "report.json";
  write_json(out, report_to_json(report));
  record_stage(run, "evaluate", config, {in}, {out});
}

void stage_sweep(const PipelineConfig& config, const fs::path& run) {
  const auto in = run / "features" / "features.csv";
  const auto m = feature_matrix_from_csv(read_text(in));
  const auto opts = config.eval_options();
  const auto sweep = sweep_pcut(m, config.p_cut_grid, opts);
  const size_t best = best_grid_index(sweep);
  const auto& rep = sweep[best].repetitions.at(static_cast<size_t>(config.export_repetition));

  SelectionResult sel;
  sel.p_cut = sweep[best].p_cut;
  sel.omega = rep.omega;
  sel.p.assign(static_cast<size_t>(m.cols()), 1.0);
  const auto cols = method_columns(m.schema, config.method);
  const auto pm = training_pvalues(m, rep.train, config.method);
  for (size_t k = 0; k < pm.size(); ++k) sel.p[cols[k]] = pm[k];

  json summary;
  summary["method"] = method_name(config.method);
  summary["best_index"] = best;
  summary["best_p_cut"] = sweep[best].p_cut;
  summary["export_repetition"] = config.export_repetition;
  summary["grid"] = json::array();
  for (const auto& r : sweep) summary["grid"].push_back(report_to_json(r, false));

  const fs::path dir = run / "eval";
  write_text(dir / "sweep.csv", sweep_to_csv(sweep));
  write_json(dir / "sweep.json", summary);
  write_json(dir / "selection_best.json", selection_to_json(sel));
  record_stage(run, "sweep-pcut", config, {in},
               {dir / "sweep.csv", dir / "sweep.json", dir / "selection_best.json"});
}

void stage_export_map(const PipelineConfig& config, const fs::path& run, const fs::path& selection_path) {
  fs::path sel_path = selection_path;
  if (sel_path.empty()) {
    sel_path = fs::exists(run / "eval" / "selection_best.json") ? run / "eval" / "selection_best.json"
                                                                 : run / "model" / "selection.json";
  }
  const auto sel = selection_from_json(read_json(sel_path));
  const auto features = run / "features" / "features.csv";
  std::istringstream header(read_text(features));
  std::string first;
  std::getline(header, first);
  const auto schema = feature_matrix_from_csv(first + "\n").schema;
  const auto sphere = read_sphere(run / "template" / "sphere.off");
  const auto mean = read_mean(run, sphere);

  const fs::path ply = run / "map" / "significance.ply";
  json side = export_significance_map(sel, schema, mean.mesh, ply);

  const auto listing = read_json(run / "subjects.json");
  std::vector<fs::path> inputs{sel_path, run / "template" / "mean_coeffs.json"};
  if (listing.contains("truth") && listing.contains("rotations")) {
    const auto log = read_json(run / "registered" / "alignments.json");
    inputs.push_back(run / "registered" / "alignments.json");
    std::vector<TriangleMesh> meshes;
    std::vector<SubjectAlignment> alignments;
    std::vector<Mat3> rotations;
    for (const auto& e : log) {
      const auto id = e["id"].get<std::string>();
      bool affected = false;
      for (const auto& s : listing["subjects"]) affected = affected || (s["id"] == id && s["label"] == -1);
      if (!affected) continue;
      SubjectAlignment a;
      a.object_rotation = json_mat(e["object_rotation"]);
      a.param_rotation = json_mat(e["param_rotation"]);
      a.translation = json_vec(e["translation"]);
      alignments.push_back(a);
      rotations.push_back(json_mat(listing["rotations"].at(id)));
      meshes.push_back(load_mesh(run / "registered" / (id + ".off")));
    }
    GroundTruth truth;
    truth.bump_center = json_vec(listing["truth"]["bump_center"]);
    truth.bump_radius = listing["truth"]["bump_radius"].get<double>();
    truth.amplitude = listing["truth"]["amplitude"].get<double>();
    const auto mask = template_truth_mask(meshes, alignments, rotations, truth);
    side["ground_truth_vertices"] = mask.size();
    side["shape_recall"] = shape_recall(sel.omega, schema, mask);
  }
  write_json(run / "map" / "significance.json", side);
  record_stage(run, "export-map", config, inputs, {ply, run / "map" / "significance.json"});
}

}  // namespace qcs
