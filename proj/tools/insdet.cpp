// insdet: synthesize, match, evaluate, benchmark and validate from the shell.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
// Every run writes a JSON run manifest next to its output.

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "insdet/insdet.hpp"
#include "insdet/pipeline.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace insdet;

namespace {

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char two[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(two, sizeof two, "%02x", md[i]);
    hex += two;
  }
  return hex;
}

std::string sha256_text(const std::string& text) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr);
  std::string hex;
  char two[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(two, sizeof two, "%02x", md[i]);
    hex += two;
  }
  return hex;
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) fail(ErrorCode::kMissingPath, std::string(what) + " not found: " + path);
}

ojson read_config_file(const std::string& path) {
  if (path.empty()) return ojson::object();
  require_file(path, "config file");
  std::ifstream in(path);
  try {
    auto j = ojson::parse(in);
    if (!j.is_object()) fail(ErrorCode::kConfig, "config file must hold a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, "malformed config file " + path + ": " + e.what());
  }
}

// Flag > config file > default.
template <typename T>
void resolve(T& value, const CLI::Option* flag, const ojson& file, const char* key) {
  if (flag && flag->count() > 0) return;
  auto it = file.find(key);
  if (it == file.end()) return;
  try {
    value = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::kConfig, std::string("config key '") + key + "' has the wrong type");
  }
}

void reject_unknown_keys(const ojson& file, std::initializer_list<std::string_view> known) {
  for (const auto& [key, v] : file.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
    }
  }
}

class RunManifest {
 public:
  RunManifest(std::string command, const std::vector<std::string>& argv) {
    doc_["command"] = std::move(command);
    doc_["argv"] = argv;
    doc_["tool_version"] = INSDET_VERSION;
    doc_["config"] = ojson::object();
    doc_["seed"] = nullptr;
    doc_["inputs"] = ojson::object();
    doc_["outputs"] = ojson::array();
    doc_["stages"] = ojson::object();
  }

  void config(ojson c) { doc_["config"] = std::move(c); }
  void seed(std::uint64_t s) { doc_["seed"] = s; }
  void input(const std::string& role, const fs::path& p) {
    doc_["inputs"][role] = {{"path", p.string()}, {"sha256", sha256_file(p)}};
  }
  void input_digest(const std::string& role, const std::string& what, const std::string& digest) {
    doc_["inputs"][role] = {{"path", what}, {"sha256", digest}};
  }
  void output(const fs::path& p) { doc_["outputs"].push_back(p.string()); }
  void extra(const std::string& key, ojson v) { doc_[key] = std::move(v); }

  template <typename Fn>
  auto stage(const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      doc_["stages"][name] = dt.count();
    };
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      finish();
    } else {
      auto r = fn();
      finish();
      return r;
    }
  }

  void write(const fs::path& path) const {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write manifest " + path.string());
    out << doc_.dump(2) << '\n';
  }

 private:
  ojson doc_;
};

fs::path sibling_manifest(const fs::path& out) {
  fs::path p = out;
  p.replace_extension(".manifest.json");
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

std::string fmt_metric(const ojson& v) {
  if (v.is_null()) return "-";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", v.get<double>());
  return buf;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string config_file, dataset, out, manifest;
  std::size_t count = 10;
  std::uint64_t seed = 0;
  CLI::Option *count_opt = nullptr, *seed_opt = nullptr, *dataset_opt = nullptr, *out_opt = nullptr;
};

constexpr std::string_view kSynthPassthrough[] = {"count", "seed", "dataset", "out"};

struct SynthRun {
  SynthConfig config;
  std::vector<ForegroundAsset> assets;
  std::vector<Background> backgrounds;
};

SynthRun prepare_synth(SynthArgs& o, RunManifest& m, unsigned threads) {
  const auto file = read_config_file(o.config_file);
  SynthRun run;
  run.config = synth_config_from_json(file, {}, kSynthPassthrough);
  resolve(o.count, o.count_opt, file, "count");
  resolve(o.seed, o.seed_opt, file, "seed");
  resolve(o.dataset, o.dataset_opt, file, "dataset");
  resolve(o.out, o.out_opt, file, "out");
  if (o.dataset.empty()) fail(ErrorCode::kConfig, "--dataset is required");
  if (o.out.empty()) fail(ErrorCode::kConfig, "--out is required");
  if (o.count < 1) fail(ErrorCode::kConfig, "--count must be >= 1");
  if (!o.config_file.empty()) m.input("config", o.config_file);

  const auto layout = m.stage("scan", [&] { return scan_dataset(o.dataset); });
  for (const auto& w : layout.warnings) std::cerr << "warning: " << w << '\n';
  m.stage("load", [&] {
    run.assets = load_assets(layout, threads);
    run.backgrounds = load_backgrounds(layout, threads);
  });
  if (run.backgrounds.empty()) fail(ErrorCode::kEmptyInput, "no background images in " + o.dataset);

  // One digest over every input image, in scan order.
  std::string listing;
  for (const auto& inst : layout.instances) {
    for (const auto& v : inst.views) listing += v.file.string() + ' ' + sha256_file(v.file) + '\n';
  }
  for (const auto& b : layout.backgrounds) listing += b.file.string() + ' ' + sha256_file(b.file) + '\n';
  m.input_digest("dataset", o.dataset, sha256_text(listing));

  auto snapshot = synth_config_to_json(run.config);
  snapshot["count"] = o.count;
  snapshot["seed"] = o.seed;
  snapshot["dataset"] = o.dataset;
  snapshot["out"] = o.out;
  m.config(snapshot);
  m.seed(o.seed);
  return run;
}

int cmd_synth(SynthArgs& o, const std::vector<std::string>& argv, unsigned threads) {
  RunManifest m("synth", argv);
  auto run = prepare_synth(o, m, threads);
  const auto manifest = m.stage("generate", [&] {
    return generate_dataset(run.config, run.assets, run.backgrounds, o.count, o.out, o.seed, threads);
  });
  m.output(manifest.annotation_file);
  m.output(manifest.manifest_file);
  std::size_t anns = 0;
  for (const auto& s : manifest.scenes) anns += s.num_annotations;
  const fs::path mpath = o.manifest.empty() ? fs::path(o.out) / "run_manifest.json" : fs::path(o.manifest);
  m.write(mpath);
  std::cout << "synth: " << manifest.scenes.size() << " scenes, " << anns << " annotations -> "
            << o.out << '\n';
  return 0;
}

// ---------------------------------------------------------------- match

struct MatchArgs {
  std::string config_file, proposals, proposal_feats, profile_feats, out, manifest;
  std::string algo = "stable";
  double tau = kDefaultTau;
  bool strict = false;
  CLI::Option *algo_opt = nullptr, *tau_opt = nullptr, *strict_opt = nullptr;
};

struct MatchInputs {
  AnnotationSet proposals;
  FeatureFile proposal_features;
  std::vector<InstanceProfile> profiles;
  MatchConfig config;
};

MatchInputs prepare_match(MatchArgs& o, RunManifest& m) {
  const auto file = read_config_file(o.config_file);
  reject_unknown_keys(file, {"algorithm", "tau", "strict"});
  resolve(o.algo, o.algo_opt, file, "algorithm");
  resolve(o.tau, o.tau_opt, file, "tau");
  resolve(o.strict, o.strict_opt, file, "strict");
  MatchInputs in;
  in.config.algorithm = parse_match_algorithm(o.algo);
  in.config.tau = o.tau;
  in.config.strict = o.strict;
  if (!(o.tau >= -1.0 && o.tau <= 1.0)) fail(ErrorCode::kConfig, "--tau must lie in [-1, 1]");
  if (o.strict && in.config.algorithm != MatchAlgorithm::kRankSelect) {
    fail(ErrorCode::kConfig, "--strict applies to rank-select only");
  }
  require_file(o.proposals, "proposal table");
  require_file(o.proposal_feats, "proposal feature file");
  require_file(o.profile_feats, "profile feature file");
  if (!o.config_file.empty()) m.input("config", o.config_file);
  m.input("proposals", o.proposals);
  m.input("proposal_features", o.proposal_feats);
  m.input("profile_features", o.profile_feats);

  m.stage("load", [&] {
    in.proposals = read_annotations(o.proposals);
    if (!in.proposals.proposals) fail(ErrorCode::kSchema, o.proposals + " has no 'proposals' array");
    in.proposal_features = read_feature_file(o.proposal_feats);
    const auto profile_file = read_feature_file(o.profile_feats);
    if (profile_file.dim != in.proposal_features.dim) {
      fail(ErrorCode::kDimMismatch, "proposal features have dim " +
                                        std::to_string(in.proposal_features.dim) +
                                        ", profile features have dim " +
                                        std::to_string(profile_file.dim));
    }
    in.profiles = profiles_from_features(profile_file, in.proposals.instances);
  });
  m.config({{"algorithm", std::string(to_string(in.config.algorithm))},
            {"tau", in.config.tau},
            {"strict", in.config.strict},
            {"tie_break", kTieBreakRule}});
  return in;
}

std::vector<Detection> flatten(const std::vector<ImageMatch>& matches) {
  std::vector<Detection> dets;
  for (const auto& im : matches) dets.insert(dets.end(), im.detections.begin(), im.detections.end());
  return dets;
}

int cmd_match(MatchArgs& o, const std::vector<std::string>& argv, unsigned threads) {
  RunManifest m("match", argv);
  auto in = prepare_match(o, m);
  const auto matches = m.stage("match", [&] {
    return match_images(in.proposals.images, *in.proposals.proposals, in.proposal_features,
                        in.profiles, in.config, threads);
  });
  AnnotationSet out;
  out.images = in.proposals.images;
  out.instances = in.proposals.instances;
  out.annotations = in.proposals.annotations;
  out.detections = flatten(matches);
  out.metadata = {{"algorithm", std::string(to_string(in.config.algorithm))},
                  {"tau", in.config.tau},
                  {"strict", in.config.strict},
                  {"tie_break", kTieBreakRule},
                  {"proposals", o.proposals}};
  m.stage("write", [&] { write_annotations(o.out, out); });
  m.output(o.out);
  m.write(o.manifest.empty() ? sibling_manifest(o.out) : fs::path(o.manifest));
  std::cout << "match (" << to_string(in.config.algorithm) << ", tau " << in.config.tau
            << "): " << out.detections->size() << " detections -> " << o.out << '\n';
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string config_file, detections, ground_truth, out = "report.json", plot, manifest;
  std::string ar_grid = "literal";
  std::vector<int> max_dets{10, 100};
  CLI::Option *grid_opt = nullptr, *max_dets_opt = nullptr;
};

ArGrid parse_ar_grid(const std::string& s) {
  if (s == "literal") return ArGrid::kLiteral;
  if (s == "coco") return ArGrid::kCoco;
  fail(ErrorCode::kConfig, "--ar-grid must be literal or coco");
}

EvalInput eval_input(const AnnotationSet& gt, std::vector<Detection> dets) {
  std::set<ImageId> images;
  for (const auto& im : gt.images) images.insert(im.id);
  std::set<ImageId> unknown;
  for (const auto& d : dets) {
    if (!images.count(d.image_id)) unknown.insert(d.image_id);
  }
  if (!unknown.empty()) {
    std::string list;
    for (auto id : unknown) list += (list.empty() ? "" : ", ") + std::to_string(id);
    fail(ErrorCode::kUnknownId, "detections reference unknown image ids: " + list);
  }
  EvalInput in;
  in.detections = std::move(dets);
  in.ground_truth = gt.annotations;
  in.images = gt.images;
  for (const auto& i : gt.instances) in.catalog.push_back(i.id);
  return in;
}

void print_report(const ojson& r, std::ostream& os) {
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %8s %8s %8s\n", "metric", "avg", "hard",
                "easy", "small", "medium", "large");
  os << line;
  for (const auto& [key, row] : r.items()) {
    if (key == "summary" || key == "config" || key == "counts") continue;
    std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %8s %8s %8s\n", key.c_str(),
                  fmt_metric(row["avg"]).c_str(), fmt_metric(row["hard"]).c_str(),
                  fmt_metric(row["easy"]).c_str(), fmt_metric(row["small"]).c_str(),
                  fmt_metric(row["medium"]).c_str(), fmt_metric(row["large"]).c_str());
    os << line;
  }
}

int cmd_eval(EvalArgs& o, const std::vector<std::string>& argv, unsigned threads) {
  RunManifest m("eval", argv);
  const auto file = read_config_file(o.config_file);
  reject_unknown_keys(file, {"ar_grid", "ar_max_dets"});
  resolve(o.ar_grid, o.grid_opt, file, "ar_grid");
  resolve(o.max_dets, o.max_dets_opt, file, "ar_max_dets");
  EvalConfig config;
  config.ar_grid = parse_ar_grid(o.ar_grid);
  config.ar_max_dets = o.max_dets;
  config.threads = threads;
  for (int k : o.max_dets) {
    if (k < 1) fail(ErrorCode::kConfig, "AR max detections must be >= 1");
  }
  require_file(o.ground_truth, "ground-truth file");
  require_file(o.detections, "detection file");
  if (!o.config_file.empty()) m.input("config", o.config_file);
  m.input("ground_truth", o.ground_truth);
  m.input("detections", o.detections);
  m.config({{"ar_grid", o.ar_grid}, {"ar_max_dets", o.max_dets}});

  const auto in = m.stage("load", [&] {
    const auto gt = read_annotations(o.ground_truth);
    auto dets = read_annotations(o.detections);
    if (!dets.detections) fail(ErrorCode::kSchema, o.detections + " has no 'detections' array");
    return eval_input(gt, std::move(*dets.detections));
  });
  const auto report = m.stage("evaluate", [&] { return evaluate(in, config); });
  const auto j = report_to_json(report);
  write_text(o.out, j.dump(2) + "\n");
  m.output(o.out);
  if (!o.plot.empty()) {
    const fs::path dir = o.plot;
    write_text(dir / "pr50_interpolated.csv", pr_interpolated_csv(report.pr50));
    write_text(dir / "pr50_staircase.csv", pr_staircase_csv(report.pr50));
    const auto pr75 = pr_curve(in, 0.75);
    write_text(dir / "pr75_interpolated.csv", pr_interpolated_csv(pr75));
    write_text(dir / "pr.svg", pr_plot_svg({{"IoU 0.50", &report.pr50}, {"IoU 0.75", &pr75}}));
    for (const char* f : {"pr50_interpolated.csv", "pr50_staircase.csv", "pr75_interpolated.csv", "pr.svg"}) {
      m.output(dir / f);
    }
  }
  m.write(o.manifest.empty() ? sibling_manifest(o.out) : fs::path(o.manifest));
  print_report(j, std::cout);
  return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string config_file, stage, out = "bench.json", manifest, ground_truth;
  int repeat = 3;
  std::vector<std::string> algos{"rank-select", "stable"};
  SynthArgs synth;
  MatchArgs match;
  EvalArgs eval;
  CLI::Option *repeat_opt = nullptr, *algos_opt = nullptr;
};

struct BenchRow {
  std::string method;
  double seconds_per_image = 0.0;
  std::optional<double> ap;
};

template <typename Fn>
double mean_seconds(int repeat, Fn&& fn) {
  double total = 0.0;
  for (int r = 0; r < repeat; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    total += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return total / repeat;
}

int cmd_bench(BenchArgs& o, const std::vector<std::string>& argv, unsigned threads) {
  RunManifest m("bench", argv);
  const auto file = read_config_file(o.config_file);
  reject_unknown_keys(file, {"repeat", "algorithms"});
  resolve(o.repeat, o.repeat_opt, file, "repeat");
  resolve(o.algos, o.algos_opt, file, "algorithms");
  if (o.repeat < 3) fail(ErrorCode::kConfig, "--repeat must be >= 3");
  if (!o.config_file.empty()) m.input("config", o.config_file);

  std::vector<BenchRow> rows;
  if (o.stage == "synth") {
    o.synth.out = (fs::temp_directory_path() / ("insdet_bench_" + std::to_string(::getpid()))).string();
    auto run = prepare_synth(o.synth, m, threads);
    const double s = mean_seconds(o.repeat, [&] {
      generate_dataset(run.config, run.assets, run.backgrounds, o.synth.count, o.synth.out,
                       o.synth.seed, threads);
    });
    fs::remove_all(o.synth.out);
    rows.push_back({"cut-paste", s / double(o.synth.count), std::nullopt});
  } else if (o.stage == "match") {
    auto in = prepare_match(o.match, m);
    std::optional<AnnotationSet> gt;
    if (!o.ground_truth.empty()) {
      require_file(o.ground_truth, "ground-truth file");
      m.input("ground_truth", o.ground_truth);
      gt = read_annotations(o.ground_truth);
    }
    const double images = std::max<std::size_t>(1, in.proposals.images.size());
    for (const auto& name : o.algos) {
      MatchConfig c = in.config;
      c.algorithm = parse_match_algorithm(name);
      c.strict = false;
      std::vector<ImageMatch> matches;
      const double s = mean_seconds(o.repeat, [&] {
        matches = match_images(in.proposals.images, *in.proposals.proposals,
                               in.proposal_features, in.profiles, c, threads);
      });
      BenchRow row{name, s / images, std::nullopt};
      if (gt) row.ap = coco_ap(eval_input(*gt, flatten(matches))).ap;
      rows.push_back(row);
    }
  } else if (o.stage == "eval") {
    require_file(o.eval.ground_truth, "ground-truth file");
    require_file(o.eval.detections, "detection file");
    m.input("ground_truth", o.eval.ground_truth);
    m.input("detections", o.eval.detections);
    const auto gt = read_annotations(o.eval.ground_truth);
    auto dets = read_annotations(o.eval.detections);
    if (!dets.detections) fail(ErrorCode::kSchema, o.eval.detections + " has no 'detections' array");
    const auto in = eval_input(gt, std::move(*dets.detections));
    EvalConfig config;
    config.threads = threads;
    EvalReport report;
    const double s = mean_seconds(o.repeat, [&] { report = evaluate(in, config); });
    rows.push_back({"eval", s / double(std::max<std::size_t>(1, gt.images.size())),
                    report.overall().ap});
  } else {
    fail(ErrorCode::kConfig, "--stage must be synth, match or eval");
  }

  ojson table = ojson::array();
  std::printf("%-14s %14s %10s\n", "method", "time (sec)", "AP (%)");
  for (const auto& r : rows) {
    const ojson ap = r.ap ? ojson(*r.ap * 100.0) : ojson(nullptr);
    std::printf("%-14s %14.6f %10s\n", r.method.c_str(), r.seconds_per_image, fmt_metric(ap).c_str());
    table.push_back({{"method", r.method}, {"time_sec_per_image", r.seconds_per_image}, {"AP", ap}});
  }
  m.extra("bench", {{"stage", o.stage}, {"repeat", o.repeat}, {"rows", table}});
  write_text(o.out, ojson{{"stage", o.stage}, {"repeat", o.repeat}, {"rows", table}}.dump(2) + "\n");
  m.output(o.out);
  m.write(o.manifest.empty() ? sibling_manifest(o.out) : fs::path(o.manifest));
  return 0;
}

// ---------------------------------------------------------------- validate

struct ValidateArgs {
  std::vector<std::string> annotations, features;
  std::string proposals, manifest = "validate.manifest.json";
};

int cmd_validate(ValidateArgs& o, const std::vector<std::string>& argv) {
  RunManifest m("validate", argv);
  std::vector<std::string> errors, warnings;
  auto guarded = [&](const std::string& what, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      errors.push_back(what + ": " + std::string(to_string(e.code())) + ": " + e.what());
    }
  };
  if (o.annotations.empty() && o.features.empty() && o.proposals.empty()) {
    fail(ErrorCode::kConfig, "nothing to validate: pass --annotations, --features or --proposals");
  }
  for (const auto& f : o.annotations) {
    require_file(f, "annotation file");
    m.input("annotations:" + f, f);
    guarded(f, [&] { read_annotations(f); });
  }
  std::set<std::string> feature_ids;
  for (const auto& f : o.features) {
    require_file(f, "feature file");
    m.input("features:" + f, f);
    guarded(f, [&] {
      const auto ff = read_feature_file(f);
      feature_ids.insert(ff.ids.begin(), ff.ids.end());
    });
  }
  if (!o.proposals.empty()) {
    require_file(o.proposals, "proposal table");
    m.input("proposals", o.proposals);
    guarded(o.proposals, [&] {
      const auto set = read_annotations(o.proposals);
      if (!set.proposals) fail(ErrorCode::kSchema, "no 'proposals' array");
      const fs::path base = fs::path(o.proposals).parent_path();
      for (const auto& p : *set.proposals) {
        const std::string where = "proposal " + p.proposal_id;
        if (!o.features.empty() && !feature_ids.count(p.proposal_id)) {
          warnings.push_back(where + ": no feature vector");
        }
        if (!p.mask_file || !p.square_box) {
          warnings.push_back(where + ": no mask or square_bbox to check");
          continue;
        }
        guarded(where, [&] {
          const auto* im = set.find_image(p.image_id);
          const auto mask_img = read_png(base / *p.mask_file, 1);
          if (mask_img.width != im->width || mask_img.height != im->height) {
            fail(ErrorCode::kDimMismatch, "mask size differs from image size");
          }
          Mask mask(mask_img.width, mask_img.height);
          for (int y = 0; y < mask_img.height; ++y) {
            for (int x = 0; x < mask_img.width; ++x) mask.set(x, y, mask_img.at(x, y, 0) > 0);
          }
          const auto expected = min_bounding_square(mask, im->width, im->height);
          if (!(*p.square_box == expected)) {
            fail(ErrorCode::kSchema, "square_bbox violates the minimum bounding square of its mask");
          }
          if (!(*tight_box(mask) == p.box)) warnings.push_back(where + ": bbox is not the mask's tight box");
        });
      }
    });
  }
  for (const auto& w : warnings) std::cout << "warning: " << w << '\n';
  for (const auto& e : errors) std::cout << "error: " << e << '\n';
  std::cout << "validate: " << errors.size() << " errors, " << warnings.size() << " warnings\n";
  m.extra("result", {{"errors", errors}, {"warnings", warnings}});
  m.write(o.manifest);
  return errors.empty() ? 0 : 1;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kConfig:
    case ErrorCode::kMissingPath:
      return 2;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instance detection toolkit: synthesize, match, evaluate"};
  app.set_version_flag("--version", INSDET_VERSION);
  app.require_subcommand(1);
  unsigned threads = default_thread_count();
  app.add_option("--threads", threads, "worker threads (default: INSDET_THREADS or all cores)")
      ->check(CLI::PositiveNumber);

  SynthArgs so;
  auto* synth = app.add_subcommand("synth", "generate a cut-paste dataset");
  synth->add_option("--config", so.config_file, "JSON config file");
  so.dataset_opt = synth->add_option("--dataset", so.dataset, "dataset root (objects/, backgrounds/)");
  so.out_opt = synth->add_option("--out", so.out, "output directory");
  so.count_opt = synth->add_option("--count", so.count, "number of scenes");
  so.seed_opt = synth->add_option("--seed", so.seed, "master seed");
  synth->add_option("--manifest", so.manifest, "run manifest path");

  MatchArgs mo;
  auto* match = app.add_subcommand("match", "match proposals to instances");
  auto add_match_flags = [](CLI::App* cmd, MatchArgs& o, bool need_out) {
    cmd->add_option("--config", o.config_file, "JSON config file");
    cmd->add_option("--proposals", o.proposals, "proposal table (annotation JSON)")->required();
    cmd->add_option("--proposal-feats", o.proposal_feats, "proposal feature file")->required();
    cmd->add_option("--profile-feats", o.profile_feats, "profile feature file")->required();
    o.algo_opt = cmd->add_option("--algo", o.algo, "rank-select or stable");
    o.tau_opt = cmd->add_option("--tau", o.tau, "similarity threshold");
    o.strict_opt = cmd->add_flag("--strict", o.strict, "rank-select: retire matched instances");
    if (need_out) cmd->add_option("--out", o.out, "detections file")->required();
  };
  add_match_flags(match, mo, true);
  match->add_option("--manifest", mo.manifest, "run manifest path");

  EvalArgs eo;
  auto* eval = app.add_subcommand("eval", "evaluate detections");
  eval->add_option("--config", eo.config_file, "JSON config file");
  eval->add_option("--detections", eo.detections, "detections file")->required();
  eval->add_option("--ground-truth", eo.ground_truth, "ground-truth annotation file")->required();
  eo.grid_opt = eval->add_option("--ar-grid", eo.ar_grid, "AR IoU grid: literal (0.5:1.0) or coco (0.5:0.95)");
  eo.max_dets_opt = eval->add_option("--ar-max-dets", eo.max_dets, "AR detection caps");
  eval->add_option("--out", eo.out, "report JSON path");
  eval->add_option("--plot", eo.plot, "directory for PR tables and SVG");
  eval->add_option("--manifest", eo.manifest, "run manifest path");

  BenchArgs bo;
  auto* bench = app.add_subcommand("bench", "time a pipeline stage");
  bench->add_option("--stage", bo.stage, "synth, match or eval")->required();
  bench->add_option("--config", bo.config_file, "JSON config file for bench keys");
  bo.repeat_opt = bench->add_option("--repeat", bo.repeat, "repetitions (>= 3)");
  bo.algos_opt = bench->add_option("--algos", bo.algos, "match stage: algorithms to time");
  bench->add_option("--synth-config", bo.synth.config_file, "synth stage: config file");
  bo.synth.dataset_opt = bench->add_option("--dataset", bo.synth.dataset, "synth stage: dataset root");
  bo.synth.count_opt = bench->add_option("--count", bo.synth.count, "synth stage: scenes");
  bo.synth.seed_opt = bench->add_option("--seed", bo.synth.seed, "synth stage: seed");
  bench->add_option("--proposals", bo.match.proposals, "match stage: proposal table");
  bench->add_option("--proposal-feats", bo.match.proposal_feats, "match stage: proposal features");
  bench->add_option("--profile-feats", bo.match.profile_feats, "match stage: profile features");
  bo.match.tau_opt = bench->add_option("--tau", bo.match.tau, "match stage: threshold");
  bench->add_option("--ground-truth", bo.ground_truth, "ground truth for the AP column");
  bench->add_option("--detections", bo.eval.detections, "eval stage: detections file");
  bench->add_option("--out", bo.out, "bench table JSON");
  bench->add_option("--manifest", bo.manifest, "run manifest path");

  ValidateArgs vo;
  auto* validate = app.add_subcommand("validate", "check files against the on-disk contracts");
  validate->add_option("--annotations", vo.annotations, "annotation files");
  validate->add_option("--features", vo.features, "feature files");
  validate->add_option("--proposals", vo.proposals, "proposal table with mask files");
  validate->add_option("--manifest", vo.manifest, "run manifest path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::vector<std::string> args(argv, argv + argc);
  try {
    if (*synth) return cmd_synth(so, args, threads);
    if (*match) return cmd_match(mo, args, threads);
    if (*eval) return cmd_eval(eo, args, threads);
    if (*bench) {
      bo.eval.ground_truth = bo.ground_truth;
      return cmd_bench(bo, args, threads);
    }
    if (*validate) return cmd_validate(vo, args);
  } catch (const Error& e) {
    std::cerr << "insdet: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "insdet: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
