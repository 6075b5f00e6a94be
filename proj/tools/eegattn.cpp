#include "eegattn/evaluation.hpp"
#include "eegattn/io.hpp"
#include "eegattn/pipeline.hpp"
#include "eegattn/realtime.hpp"
#include "eegattn/selection.hpp"
#include "eegattn/service.hpp"
#include "eegattn/synth.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>
#include <fftw3.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

using namespace eegattn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.3.0";

std::atomic<bool> g_interrupted{false};

/// `dir/name.ext` -> `dir/name<suffix>`
std::string sidecar(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

std::string file_hash(const std::string& path) {
  auto in = io::open_in(path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

json library_versions() {
  return {{"eegattn", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"fftw", std::string(fftw_version)},
          {"boost", BOOST_LIB_VERSION},
          {"compiler", __VERSION__}};
}

/// Reproducibility record next to the stage's main output. Inputs are listed
/// by file name and content hash so the record does not depend on where the
/// run happened.
void write_run_manifest(const std::string& out, const std::string& command, const json& config,
                        const std::vector<std::string>& inputs, const json& extra = json::object()) {
  json in = json::array();
  for (const auto& p : inputs) in.push_back({{"file", fs::path(p).filename().string()}, {"fnv1a", file_hash(p)}});
  json j = {{"command", command}, {"config", config}, {"inputs", in}, {"versions", library_versions()}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  io::write_json(sidecar(out, ".run.json"), j);
}

// ---------------------------------------------------------------------------
// Shared option groups

struct PipelineOpts {
  std::size_t L = 1750;
  double r = 0.7;
  std::size_t trim = 250;
  double reject_uv = 150;
  bool no_blink_removal = false;
  double notch_hz = 50;
  std::size_t ensemble = 50;

  void add(CLI::App* app) {
    app->add_option("--L", L, "window length in samples")->capture_default_str();
    app->add_option("--r", r, "window overlap fraction")->capture_default_str();
    app->add_option("--trim", trim, "samples trimmed from each window edge after filtering")->capture_default_str();
    app->add_option("--reject-uv", reject_uv, "amplitude rejection threshold")->capture_default_str();
    app->add_option("--notch-hz", notch_hz, "line frequency")->capture_default_str();
    app->add_option("--ensemble", ensemble, "EEMD ensemble size")->capture_default_str();
    app->add_flag("--no-blink-removal", no_blink_removal);
  }

  pipeline::PipelineConfig config() const {
    pipeline::PipelineConfig c;
    c.segmentation.length = L;
    c.segmentation.overlap = r;
    c.segmentation.trim = trim;
    c.reject_uv = reject_uv;
    c.notch_hz = notch_hz;
    c.blink_removal = !no_blink_removal;
    c.blink.ensemble_size = ensemble;
    c.validate();
    return c;
  }
};

struct GridOpts {
  std::vector<double> c2{0.01, 0.1, 1, 10, 100};
  std::vector<double> gamma{0.001, 0.01, 0.1, 0.5, 1, 10};

  void add(CLI::App* app) {
    app->add_option("--c2-grid", c2, "RBF C values")->delimiter(',')->capture_default_str();
    app->add_option("--gamma-grid", gamma, "RBF gamma values")->delimiter(',')->capture_default_str();
  }
};

std::vector<std::string> read_selection(const std::string& path) {
  const auto j = io::read_json(path);
  std::vector<std::string> out;
  for (const auto& e : j.at("consensus")) out.push_back(e.at("name").get<std::string>());
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, path + ": consensus feature set is empty");
  return out;
}

json read_feature_sidecar(const std::string& features_path) {
  const auto p = sidecar(features_path, ".manifest.json");
  if (!fs::exists(p)) throw Error(ErrorCode::IoError, "input file not found: " + p + " (written by `features`)");
  return io::read_json(p);
}

realtime::AlertPolicy parse_policy(const std::string& spec) {
  realtime::AlertPolicy p;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "policy item '" + item + "' is not key=value");
    const auto key = item.substr(0, eq);
    const auto val = item.substr(eq + 1);
    const double v = io::parse_double(val, "--policy");
    if (key == "N" || key == "consecutive_required") p.consecutive_required = static_cast<std::size_t>(v);
    else if (key == "cooldown") p.cooldown = static_cast<std::size_t>(v);
    else if (key == "min_duration" || key == "min_duration_s") p.min_duration_s = v;
    else throw Error(ErrorCode::InvalidConfig, "unknown policy key '" + key + "'");
  }
  p.validate();
  return p;
}

json policy_json(const realtime::AlertPolicy& p) { return service::policy_json(p); }

realtime::DurationConvention parse_convention(const std::string& s) {
  if (s == "span") return realtime::DurationConvention::Span;
  if (s == "steps-only" || s == "steps_only") return realtime::DurationConvention::StepsOnly;
  throw Error(ErrorCode::InvalidConfig, "duration convention must be span or steps-only");
}

// ---------------------------------------------------------------------------
// Stages

struct GenerateOpts {
  std::size_t subjects = 20, blocks = 20, block_length = 7500;
  std::uint64_t seed = 2024;
  std::string contrast = "paper-like";
  std::string scores = "surrogate";
  bool no_aux = false;
  std::string out = "data.jsonl";
};

int cmd_generate(const GenerateOpts& o) {
  synth::GeneratorConfig cfg;
  cfg.subjects = o.subjects;
  if (o.blocks % 2 != 0 || o.blocks == 0)
    throw Error(ErrorCode::InvalidConfig, "--blocks must be a positive even number (classes alternate)");
  cfg.blocks_per_class = o.blocks / 2;
  cfg.block_length = o.block_length;
  cfg.seed = o.seed;
  cfg.contrast = synth::contrast_preset(o.contrast);
  cfg.scores = synth::score_mode_from_string(o.scores);
  cfg.with_aux = !o.no_aux;
  const auto blocks = synth::generate_dataset(cfg);
  std::vector<EegRecord> records;
  records.reserve(blocks.size());
  {
    auto truth = io::open_out(sidecar(o.out, ".truth.jsonl"));
    for (const auto& b : blocks) {
      records.push_back(b.record);
      truth << synth::to_json(b.truth).dump() << '\n';
    }
  }
  io::write_dataset(o.out, records);
  write_run_manifest(o.out, "generate", synth::to_json(cfg), {}, {{"seed", cfg.seed}});
  spdlog::info("wrote {} blocks for {} subjects to {}", records.size(), cfg.subjects, o.out);
  return 0;
}

struct PreprocessOpts {
  std::string in, out = "segments.jsonl";
  bool no_balance = false;
  PipelineOpts pipe;
};

int cmd_preprocess(const PreprocessOpts& o) {
  const auto records = io::read_dataset(o.in);
  const auto cfg = o.pipe.config();
  auto res = pipeline::preprocess_records(records, cfg);
  for (const auto& w : res.warnings) spdlog::warn("{}", w);
  std::vector<Segment> kept = std::move(res.kept);
  json balance = nullptr;
  if (!o.no_balance) {
    auto b = balance_by_subject(kept);
    for (const auto& w : b.warnings) spdlog::warn("{}", w);
    balance = b.retained_per_class;
    kept = b.flatten();
  }
  io::write_segments(o.out, kept);
  io::write_jsonl(sidecar(o.out, ".artifacts.jsonl"), res.records);
  io::write_json(sidecar(o.out, ".pipeline.json"), pipeline::to_json(cfg));
  write_run_manifest(o.out, "preprocess", pipeline::to_json(cfg), {o.in},
                     {{"windows", res.total}, {"rejected", res.rejected}, {"written", kept.size()},
                      {"retained_per_class", balance}});
  spdlog::info("{} windows, {} rejected, {} written to {}", res.total, res.rejected, kept.size(), o.out);
  return 0;
}

struct FeaturesOpts {
  std::string in, out = "features.csv";
  bool no_aux = false;
};

int cmd_features(const FeaturesOpts& o) {
  const auto segs = io::read_segments(o.in);
  bool with_aux = !o.no_aux;
  if (with_aux)
    for (const auto& s : segs)
      if (!s.aux) {
        with_aux = false;
        spdlog::warn("segments carry no auxiliary channels; extracting the computed catalog only");
        break;
      }
  const auto manifest = features::build_manifest({}, with_aux);
  const auto table = pipeline::extract_table(segs, manifest, manifest.names());
  io::write_feature_csv(o.out, table);
  json side = {{"manifest", manifest.to_json()}, {"manifest_hash", manifest.hash()}};
  const auto pipe = sidecar(o.in, ".pipeline.json");
  side["pipeline"] = fs::exists(pipe) ? io::read_json(pipe) : pipeline::to_json(pipeline::PipelineConfig{});
  io::write_json(sidecar(o.out, ".manifest.json"), side);
  write_run_manifest(o.out, "features", {{"with_aux", with_aux}}, {o.in},
                     {{"manifest_hash", manifest.hash()}, {"features", manifest.size()}, {"rows", table.rows()}});
  spdlog::info("{} rows x {} features written to {}", table.rows(), table.cols(), o.out);
  return 0;
}

struct SelectOpts {
  std::string in, out = "selection.json";
  double p = 0.8;
  std::size_t d = 50;
  std::vector<double> c1{0.01, 0.1, 1, 10, 100};
  GridOpts grid;
  bool exclude_aux = false;
};

int cmd_select(const SelectOpts& o) {
  const auto table = io::read_feature_csv(o.in);
  selection::SelectionConfig cfg;
  cfg.pearson_threshold = o.p;
  cfg.target_count = o.d;
  cfg.c1_grid = o.c1;
  cfg.c2_grid = o.grid.c2;
  cfg.gamma_grid = o.grid.gamma;
  cfg.exclude_aux = o.exclude_aux;
  const auto res = selection::select_features(table, cfg);
  const auto j = selection::to_json(res, cfg);
  io::write_json(o.out, j);
  write_run_manifest(o.out, "select", j["config"], {o.in}, {{"consensus_size", res.consensus.size()}});
  spdlog::info("{} PCF survivors, {} consensus features", res.pcf_survivors.size(), res.consensus.size());
  if (res.nonconverged_fits) spdlog::warn("{} SVM fits hit the iteration cap", res.nonconverged_fits);
  return 0;
}

struct TrainOpts {
  std::string in, selection, out = "model.json", report;
  GridOpts grid;
  std::vector<double> fixed_pair;
};

int cmd_train(const TrainOpts& o) {
  auto table = io::read_feature_csv(o.in);
  const auto side = read_feature_sidecar(o.in);
  const auto names = o.selection.empty() ? table.names : read_selection(o.selection);
  const auto sub = table.select_columns(names);

  learn::LosoConfig cfg;
  cfg.c2_grid = o.grid.c2;
  cfg.gamma_grid = o.grid.gamma;
  if (!o.fixed_pair.empty()) {
    if (o.fixed_pair.size() != 2) throw Error(ErrorCode::InvalidConfig, "--pair takes C2,gamma");
    cfg.c2_grid = {o.fixed_pair[0]};
    cfg.gamma_grid = {o.fixed_pair[1]};
  }
  const auto rep = learn::grid_search_loso(sub, cfg);
  std::cout << learn::format_loso_table(rep);

  realtime::ModelBundle bundle;
  bundle.manifest = features::FeatureManifest::from_json(side.at("manifest"));
  bundle.model = learn::train_final(sub, rep.modal, cfg.smo);
  bundle.model.manifest_hash = bundle.manifest.hash();
  bundle.model.metadata = {{"training_rows", sub.rows()},
                           {"subjects", sub.subject_ids().size()},
                           {"loso_mean_accuracy", rep.mean.accuracy},
                           {"pair_selection", "modal"}};
  const auto pj = side.at("pipeline");
  bundle = realtime::bundle_from_json([&] {
    auto j = realtime::to_json(bundle);
    j["pipeline"] = pj;
    return j;
  }());
  io::write_json(o.out, realtime::to_json(bundle));

  const auto report = o.report.empty() ? sidecar(o.out, ".loso_report.json") : o.report;
  io::write_json(report, learn::to_json(rep));
  {
    auto t = io::open_out(sidecar(report, ".txt"));
    t << learn::format_loso_table(rep);
  }
  write_run_manifest(o.out, "train", {{"C2_grid", cfg.c2_grid}, {"gamma_grid", cfg.gamma_grid}},
                     o.selection.empty() ? std::vector<std::string>{o.in} : std::vector<std::string>{o.in, o.selection},
                     {{"manifest_hash", bundle.manifest.hash()},
                      {"pair", {{"C2", rep.modal.c2}, {"gamma", rep.modal.gamma}}},
                      {"loso_mean_accuracy", rep.mean.accuracy}});
  if (!rep.nonconverged.empty()) spdlog::warn("{} LOSO fits hit the iteration cap", rep.nonconverged.size());
  spdlog::info("model written to {}, LOSO report to {}", o.out, report);
  return 0;
}

struct AblateOpts {
  std::string in, selection, out = "ablation.json";
  std::vector<double> pair{0.01, 0.5};
  bool grid_search_each = false;
  GridOpts grid;
};

int run_ablation(const features::FeatureTable& table, const std::vector<std::string>& selected, const AblateOpts& o,
                 const std::string& out, const std::vector<std::string>& inputs) {
  learn::AblationConfig cfg;
  if (o.pair.size() != 2) throw Error(ErrorCode::InvalidConfig, "--pair takes C2,gamma");
  cfg.pair = {o.pair[0], o.pair[1]};
  cfg.grid_search_each = o.grid_search_each;
  cfg.loso.c2_grid = o.grid.c2;
  cfg.loso.gamma_grid = o.grid.gamma;
  const auto rows = learn::ablation_suite(table, selected, cfg);
  std::cout << learn::format_ablation_table(rows);
  const auto j = learn::to_json(rows, cfg);
  io::write_json(out, j);
  {
    auto t = io::open_out(sidecar(out, ".txt"));
    t << learn::format_ablation_table(rows);
  }
  write_run_manifest(out, "ablate", {{"pair", j["pair"]}, {"grid_search_each", cfg.grid_search_each}}, inputs);
  return 0;
}

int cmd_ablate(const AblateOpts& o) {
  const auto table = io::read_feature_csv(o.in);
  const auto selected = o.selection.empty() ? table.names : read_selection(o.selection);
  std::vector<std::string> inputs{o.in};
  if (!o.selection.empty()) inputs.push_back(o.selection);
  return run_ablation(table, selected, o, o.out, inputs);
}

struct EvaluateOpts {
  std::string model, in, out = "evaluation.json";
  bool ablation = false;
  AblateOpts ablate;
};

int cmd_evaluate(const EvaluateOpts& o) {
  const auto bundle = realtime::bundle_from_json(io::read_json(o.model));
  const auto table = io::read_feature_csv(o.in);
  if (o.ablation) return run_ablation(table, bundle.model.feature_names, o.ablate, o.out, {o.model, o.in});
  const auto sub = table.select_columns(bundle.model.feature_names);
  learn::Confusion total;
  json per = json::array();
  for (const auto& [subject, rows] : learn::loso_partition(sub.subjects)) {
    learn::Confusion c;
    for (auto i : rows) {
      const Eigen::VectorXd x = sub.values.row(static_cast<Eigen::Index>(i)).transpose();
      c.add(sub.labels[i], static_cast<int>(svm::predict(bundle.model, std::span<const double>(x.data(), x.size())).label));
    }
    total += c;
    per.push_back({{"subject_id", subject}, {"confusion", learn::confusion_json(c)}, {"metrics", learn::metrics_json(learn::metrics(c))}});
  }
  const json j = {{"overall", learn::metrics_json(learn::metrics(total))}, {"confusion", learn::confusion_json(total)}, {"subjects", per}};
  io::write_json(o.out, j);
  write_run_manifest(o.out, "evaluate", json::object(), {o.model, o.in});
  std::cout << "accuracy " << learn::metrics(total).accuracy << " over " << total.total() << " segments\n";
  return 0;
}

struct StreamOpts {
  std::string model, source = "file", input, policy = "N=5", serve, log = "session.jsonl", phase = "feedback";
  std::string convention = "steps-only";
  double rate = 1.0;
  double max_seconds = 0;
  std::size_t subject = 0;
  std::uint64_t seed = 2024;
  std::string contrast = "paper-like";
  bool autostart = false;
};

int cmd_stream(const StreamOpts& o) {
  auto bundle = realtime::bundle_from_json(io::read_json(o.model));
  std::unique_ptr<synth::SampleSource> src;
  if (o.source == "file") {
    if (o.input.empty()) throw Error(ErrorCode::InvalidConfig, "--source file needs --input");
    src = std::make_unique<synth::ReplaySource>(io::read_dataset(o.input));
  } else if (o.source == "synthetic") {
    synth::GeneratorConfig g;
    g.seed = o.seed;
    g.contrast = synth::contrast_preset(o.contrast);
    g.with_aux = bundle.manifest.with_aux;
    src = std::make_unique<synth::LiveGenerator>(g, o.subject);
  } else {
    throw Error(ErrorCode::InvalidConfig, "--source must be file or synthetic");
  }
  realtime::EngineConfig ec;
  ec.policy = parse_policy(o.policy);
  ec.phase = realtime::phase_from_string(o.phase);
  const double fs = src->sample_rate();
  realtime::Engine engine(std::move(bundle), ec, fs);
  service::SessionOptions so;
  so.playback_rate = o.rate;
  so.convention = parse_convention(o.convention);
  service::Session session(std::move(engine), std::move(src), so);

  std::signal(SIGINT, [](int) { g_interrupted = true; });
  std::signal(SIGTERM, [](int) { g_interrupted = true; });

  std::unique_ptr<service::Server> server;
  if (!o.serve.empty()) {
    const auto colon = o.serve.rfind(':');
    const std::string host = colon == 0 || colon == std::string::npos ? "0.0.0.0" : o.serve.substr(0, colon);
    const int port = static_cast<int>(io::parse_double(colon == std::string::npos ? o.serve : o.serve.substr(colon + 1), "--serve"));
    server = std::make_unique<service::Server>(session);
    const int bound = server->start(host, port);
    std::cout << "serving on " << host << ":" << bound << " (GET /events, POST /control, GET /summary)" << std::endl;
    if (o.autostart) session.start();
  } else {
    session.start();
  }

  const auto t0 = std::chrono::steady_clock::now();
  for (;;) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    if (g_interrupted) break;
    if (o.max_seconds > 0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >= o.max_seconds)
      break;
    if (!server && !session.running()) break;
  }
  session.stop();
  if (server) server->stop();

  const auto log = session.log();
  io::write_jsonl(o.log, log);
  if (!log.empty()) {
    const auto s = session.summary();
    io::write_json(sidecar(o.log, ".summary.json"), s);
    std::cout << s.dump(2) << '\n';
  } else {
    spdlog::warn("no segments were classified");
  }
  return 0;
}

struct PilotOpts {
  std::vector<std::string> baseline, feedback;
  std::string pairs, out = "pilot_report.json", convention = "steps-only";
  std::string policy = "N=4";
};

/// Mean duration of counted non-attention runs in one session log.
double mean_nonattention(const std::string& path, const realtime::AlertPolicy& policy, realtime::DurationConvention c) {
  auto in = io::open_in(path);
  std::vector<realtime::LogEntry> log;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) log.push_back(realtime::log_entry_from_json(json::parse(line)));
  return realtime::session_summary(log, policy, c).mean_nonattention_s;
}

int cmd_pilot(const PilotOpts& o) {
  const auto policy = parse_policy(o.policy);
  const auto conv = parse_convention(o.convention);
  std::vector<double> base, feed;
  std::vector<std::string> inputs;
  if (!o.pairs.empty()) {
    const auto j = io::read_json(o.pairs);
    base = j.at("baseline").get<std::vector<double>>();
    feed = j.at("feedback").get<std::vector<double>>();
    inputs.push_back(o.pairs);
  } else {
    for (const auto& p : o.baseline) base.push_back(mean_nonattention(p, policy, conv));
    for (const auto& p : o.feedback) feed.push_back(mean_nonattention(p, policy, conv));
    inputs = o.baseline;
    inputs.insert(inputs.end(), o.feedback.begin(), o.feedback.end());
  }
  json j;
  try {
    const auto r = realtime::paired_t_test(base, feed);
    j = realtime::to_json(r);
    std::printf("paired t-test: n=%zu t=%.4f df=%g p=%.4g (mean difference %.3f s)\n", r.n, r.t, r.df, r.p,
                r.mean_difference);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroVariance) throw;
    j = {{"n", base.size()}, {"baseline_means", base}, {"feedback_means", feed}, {"t", nullptr}, {"p", nullptr},
         {"error", e.what()}};
    std::printf("paired t-test undefined: %s\n", e.what());
  }
  j["convention"] = o.convention;
  j["policy"] = policy_json(policy);
  io::write_json(o.out, j);
  write_run_manifest(o.out, "pilot-report", {{"convention", o.convention}, {"policy", policy_json(policy)}}, inputs);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("eegattn");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  if (const char* lvl = std::getenv("EEGATTN_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(lvl));

  CLI::App app{"EEG attention classification: data generation, training, evaluation and live streaming"};
  app.set_config("--config", "", "TOML/INI file with option overrides");
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  GenerateOpts gen;
  auto* g = app.add_subcommand("generate", "write a synthetic labeled dataset");
  g->add_option("--subjects", gen.subjects)->capture_default_str();
  g->add_option("--blocks", gen.blocks, "blocks per subject (even; classes alternate)")->capture_default_str();
  g->add_option("--block-length", gen.block_length, "samples per block")->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--contrast", gen.contrast, "class contrast: number or none|hard|paper-like|easy")->capture_default_str();
  g->add_option("--scores", gen.scores, "auxiliary scores: surrogate|planted|noise")->capture_default_str();
  g->add_flag("--no-aux", gen.no_aux, "omit auxiliary channels");
  g->add_option("--out", gen.out)->capture_default_str();

  PreprocessOpts pre;
  auto* p = app.add_subcommand("preprocess", "segment, filter and clean a dataset");
  p->add_option("--in", pre.in)->required();
  p->add_option("--out", pre.out)->capture_default_str();
  p->add_flag("--no-balance", pre.no_balance, "keep every surviving window");
  pre.pipe.add(p);

  FeaturesOpts fo;
  auto* f = app.add_subcommand("features", "extract the feature catalog from preprocessed segments");
  f->add_option("--in", fo.in)->required();
  f->add_option("--out", fo.out)->capture_default_str();
  f->add_flag("--no-aux", fo.no_aux);

  SelectOpts so;
  auto* s = app.add_subcommand("select", "Pearson filter, per-subject RFE and consensus");
  s->add_option("--in", so.in)->required();
  s->add_option("--out", so.out)->capture_default_str();
  s->add_option("--p", so.p, "correlation threshold")->capture_default_str();
  s->add_option("--d", so.d, "features kept by RFE")->capture_default_str();
  s->add_option("--c1-grid", so.c1)->delimiter(',')->capture_default_str();
  s->add_flag("--exclude-aux", so.exclude_aux);
  so.grid.add(s);

  TrainOpts to;
  auto* t = app.add_subcommand("train", "LOSO grid search and final model");
  t->add_option("--in", to.in)->required();
  t->add_option("--selection", to.selection);
  t->add_option("--out", to.out)->capture_default_str();
  t->add_option("--report", to.report);
  t->add_option("--pair", to.fixed_pair, "skip the grid and use C2,gamma")->delimiter(',')->expected(2);
  to.grid.add(t);

  EvaluateOpts eo;
  auto* e = app.add_subcommand("evaluate", "apply a model to a feature table, or run the ablation suite");
  e->add_option("--model", eo.model)->required();
  e->add_option("--in", eo.in)->required();
  e->add_option("--out", eo.out)->capture_default_str();
  e->add_flag("--ablation", eo.ablation);
  e->add_option("--pair", eo.ablate.pair)->delimiter(',')->expected(2)->capture_default_str();
  e->add_flag("--grid-search-each", eo.ablate.grid_search_each);
  eo.ablate.grid.add(e);

  AblateOpts ao;
  auto* a = app.add_subcommand("ablate", "four-row ablation under identical LOSO folds");
  a->add_option("--in", ao.in)->required();
  a->add_option("--selection", ao.selection);
  a->add_option("--out", ao.out)->capture_default_str();
  a->add_option("--pair", ao.pair)->delimiter(',')->expected(2)->capture_default_str();
  a->add_flag("--grid-search-each", ao.grid_search_each);
  ao.grid.add(a);

  StreamOpts st;
  auto* r = app.add_subcommand("stream", "run the online engine on a replayed or synthetic stream");
  r->add_option("--model", st.model)->required();
  r->add_option("--source", st.source, "file|synthetic")->capture_default_str();
  r->add_option("--input", st.input, "dataset to replay");
  r->add_option("--policy", st.policy, "e.g. N=5,cooldown=5,min_duration=8")->capture_default_str();
  r->add_option("--serve", st.serve, "[host]:port for the event service");
  r->add_flag("--autostart", st.autostart, "start streaming without waiting for a start control");
  r->add_option("--rate", st.rate, "playback rate; 0 runs unpaced")->capture_default_str();
  r->add_option("--max-seconds", st.max_seconds, "stop after this much wall time")->capture_default_str();
  r->add_option("--log", st.log)->capture_default_str();
  r->add_option("--phase", st.phase, "baseline|feedback")->capture_default_str();
  r->add_option("--convention", st.convention, "span|steps-only")->capture_default_str();
  r->add_option("--subject", st.subject, "synthetic subject index")->capture_default_str();
  r->add_option("--seed", st.seed)->capture_default_str();
  r->add_option("--contrast", st.contrast)->capture_default_str();

  PilotOpts po;
  auto* pr = app.add_subcommand("pilot-report", "paired t-test on mean non-attention durations");
  pr->add_option("--baseline", po.baseline, "session logs, one per participant")->delimiter(',');
  pr->add_option("--feedback", po.feedback, "session logs, same participant order")->delimiter(',');
  pr->add_option("--pairs", po.pairs, "JSON with baseline and feedback arrays of means");
  pr->add_option("--out", po.out)->capture_default_str();
  pr->add_option("--convention", po.convention, "span|steps-only")->capture_default_str();
  pr->add_option("--policy", po.policy)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) return cmd_generate(gen);
    if (*p) return cmd_preprocess(pre);
    if (*f) return cmd_features(fo);
    if (*s) return cmd_select(so);
    if (*t) return cmd_train(to);
    if (*e) return cmd_evaluate(eo);
    if (*a) return cmd_ablate(ao);
    if (*r) return cmd_stream(st);
    if (*pr) return cmd_pilot(po);
  } catch (const Error& err) {
    spdlog::error("{}", err.what());
    return err.code() == ErrorCode::IoError ? 2 : 1;
  } catch (const std::exception& err) {
    spdlog::error("{}", err.what());
    return 1;
  }
  return 0;
}
