// nutricast command-line tool. One subcommand per process; everything it
// writes lands under the run directory (see README for the layout).

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nutricast/nutricast.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nutricast;

namespace {

using Real = float;

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string run_dir = "run";
  std::string preset = "full";
  json config = json::object();  // parsed --config file

  CLI::Option* seed_opt = nullptr;
  CLI::Option* preset_opt = nullptr;

  void load_config() {
    if (config_path.empty()) return;
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open config '" + config_path + "'");
    try {
      config = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config '" + config_path + "' is not valid JSON: " + e.what());
    }
    if (!config.is_object()) throw ConfigError("config '" + config_path + "' must hold a JSON object");
    // flags and env (both counted by CLI11) beat the file
    if (config.contains("seed") && seed_opt->count() == 0) seed = config["seed"].get<std::uint64_t>();
    if (config.contains("preset") && preset_opt->count() == 0) preset = config["preset"].get<std::string>();
  }

  ModelConfig model_config() const {
    json j = ModelConfig::preset(preset);
    if (config.contains("model")) j.merge_patch(config["model"]);
    return j.get<ModelConfig>();
  }

  fs::path dir(const char* sub) const {
    fs::path p = fs::path(run_dir) / sub;
    fs::create_directories(p);
    return p;
  }
};

std::string utc_timestamp() {
  std::time_t t = std::time(nullptr);
  // reproducible-builds convention: pin the clock for byte-stable manifests
  if (const char* fixed = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::strtoll(fixed, nullptr, 10));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// Record of one command, appended to <run-dir>/run-manifest.json at the end.
struct RunRecord {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  json inputs = json::object();
  json outputs = json::array();

  void input(const fs::path& p) {
    if (fs::is_regular_file(p)) inputs[p.string()] = hash_file(p.string());
  }
  void output(const fs::path& p) { outputs.push_back(p.string()); }

  void commit(const Globals& g) const {
    const fs::path path = fs::path(g.run_dir) / "run-manifest.json";
    json m = fs::exists(path) ? read_json(path) : json::object();
    if (!m.contains("commands") || !m["commands"].is_array()) m["commands"] = json::array();
    m["tool"] = "nutricast";
    m["version"] = kVersion;
    m["commands"].push_back({{"command", command},
                             {"argv", argv},
                             {"config", config},
                             {"inputs", inputs},
                             {"outputs", outputs},
                             {"seed", g.seed},
                             {"threads", g.threads},
                             {"timestamp", utc_timestamp()},
                             {"version", kVersion}});
    write_json(path, m);
  }
};

fs::path default_manifest(const Globals& g, const std::string& given) {
  if (!given.empty()) return given;
  const fs::path ingested = fs::path(g.run_dir) / "data" / "manifest.jsonl";
  if (fs::exists(ingested)) return ingested;
  throw ConfigError("no --manifest given and no ingested manifest at '" + ingested.string() + "'");
}

fs::path default_checkpoint(const Globals& g, const std::string& given) {
  return given.empty() ? fs::path(g.run_dir) / "checkpoint" / "model.ckpt" : fs::path(given);
}

std::string first_head(const Checkpoint<Real>& c, const std::string& given) {
  if (!given.empty()) {
    c.model.head(given);  // throws with the known channels listed
    return given;
  }
  return c.model.heads.begin()->first;
}

const FoodItem& find_item(const Manifest& m, const std::string& id) {
  for (const auto& it : m.items)
    if (it.id == id) return it;
  throw DomainError("item '" + id + "' not in manifest");
}

std::string safe_name(std::string s) {
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  return s;
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  std::size_t n = 500;
  std::string out;
  synth::SynthOptions opt;
};

void run_synth(const Globals& g, const SynthArgs& a, RunRecord& rec) {
  const fs::path out = a.out.empty() ? fs::path(g.run_dir) / "synth" : fs::path(a.out);
  const auto res = synth::generate(a.n, g.seed, out, a.opt);
  rec.config = {{"n", a.n},
                {"seed", g.seed},
                {"resolution", a.opt.resolution},
                {"cell", a.opt.cell},
                {"sticker_probability", a.opt.sticker_probability}};
  rec.output(res.manifest);
  rec.output(out / "images");
  std::cout << "wrote " << res.items.size() << " products to " << out.string() << "\n";
}

// --- ingest ----------------------------------------------------------------

void run_ingest(const Globals& g, const std::string& manifest_path, bool lenient, RunRecord& rec) {
  rec.input(manifest_path);
  Manifest m = load_manifest(manifest_path, !lenient);
  std::vector<FoodItem> kept;
  json missing = json::array();
  for (auto item : m.items) {
    const fs::path img = fs::absolute(m.image_path(item));
    if (!fs::is_regular_file(img)) {
      missing.push_back(item.id);
      continue;
    }
    item.image_path = img.lexically_normal().string();
    kept.push_back(std::move(item));
  }
  if (!missing.empty() && !lenient) {
    throw IngestionError(std::to_string(missing.size()) + " item(s) point at missing images, first '" +
                         missing[0].get<std::string>() + "'");
  }
  if (kept.empty()) throw IngestionError("no usable items in '" + manifest_path + "'");

  std::map<std::string, std::pair<std::string, std::size_t>> nutrients;
  std::map<std::string, std::size_t> categories;
  for (const auto& it : kept) {
    for (const auto& [name, v] : it.nutrients) {
      nutrients[name].first = v.unit;
      ++nutrients[name].second;
    }
    ++categories[it.category.empty() ? kUncategorized : it.category];
  }
  json report{{"source", manifest_path}, {"items", kept.size()}, {"missing_images", missing}};
  json problems = json::array();
  for (const auto& p : m.problems) problems.push_back({{"line", p.line}, {"message", p.message}});
  report["problems"] = problems;
  for (const auto& [name, uc] : nutrients) report["nutrients"][name] = {{"unit", uc.first}, {"count", uc.second}};
  report["categories"] = categories;

  const fs::path out = g.dir("data") / "manifest.jsonl";
  write_manifest(kept, out);
  const fs::path rep = g.dir("reports") / "ingest.json";
  write_json(rep, report);
  rec.config = {{"lenient", lenient}};
  rec.output(out);
  rec.output(rep);
  std::cout << "ingested " << kept.size() << " items (" << m.problems.size() + missing.size() << " rejected)\n";
}

// --- bin -------------------------------------------------------------------

void run_bin(const Globals& g, const std::string& manifest_arg, const std::string& nutrient,
             std::optional<std::size_t> k, double percentile, RunRecord& rec) {
  const fs::path mp = default_manifest(g, manifest_arg);
  rec.input(mp);
  const Manifest m = load_manifest(mp);
  const auto bins = fit_binning(m.items, {nutrient}, percentile, k);
  const BinningSpec& spec = bins.at(nutrient);
  std::vector<std::size_t> counts(spec.total_classes(), 0);
  std::size_t excluded = 0;
  for (const auto& it : m.items) {
    const int l = label_of(it, spec);
    if (l == kExcluded) ++excluded;
    else ++counts[static_cast<std::size_t>(l)];
  }
  json j = spec;
  j["label_counts"] = counts;
  j["excluded"] = excluded;
  const fs::path out = g.dir("reports") / ("bin-" + safe_name(nutrient) + ".json");
  write_json(out, j);
  rec.config = {{"nutrient", nutrient}, {"percentile", percentile}, {"k_override", k ? json(*k) : json()}};
  rec.output(out);
  std::cout << nutrient << ": " << spec.total_classes() << " classes, threshold " << spec.threshold << " "
            << spec.unit << ", " << excluded << " excluded\n";
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string variant;
  std::vector<std::string> nutrients;
  std::optional<std::size_t> epochs, batch_size, patience, k;
  std::optional<double> lr_head, lr_encoders, split_ratio, contrastive_weight;
  bool quiet = false;
};

TrainConfig resolve_train_config(const Globals& g, const TrainArgs& a) {
  TrainConfig c;
  if (g.config.contains("train")) from_json(g.config["train"], c);
  c.seed = g.seed;
  if (!a.variant.empty()) c.variant = variant_from_string(a.variant);
  if (!a.nutrients.empty()) c.nutrients = a.nutrients;
  if (a.epochs) c.epochs = *a.epochs;
  if (a.batch_size) c.batch_size = *a.batch_size;
  if (a.patience) c.patience = *a.patience;
  if (a.k) c.k_override = *a.k;
  if (a.lr_head) c.lr_head = *a.lr_head;
  if (a.lr_encoders) c.lr_encoders = *a.lr_encoders;
  if (a.split_ratio) c.split_ratio = *a.split_ratio;
  if (a.contrastive_weight) c.contrastive_weight = *a.contrastive_weight;
  c.validate();
  return c;
}

void run_train(const Globals& g, const TrainArgs& a, RunRecord& rec) {
  const fs::path mp = default_manifest(g, a.manifest);
  rec.input(mp);
  const Manifest m = load_manifest(mp);
  const ModelConfig mc = g.model_config();
  const TrainConfig tc = resolve_train_config(g, a);
  rec.config = {{"preset", g.preset}, {"model", mc}, {"train", tc}};

  TrainHooks hooks;
  if (!a.quiet) {
    hooks.on_epoch = [&](std::size_t epoch, double loss) {
      std::cerr << "epoch " << epoch << "/" << tc.epochs << " loss " << loss << "\n";
    };
  }
  const auto t0 = std::chrono::steady_clock::now();
  Checkpoint<Real> ckpt = train<Real>(m, mc, tc, hooks);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path cp = g.dir("checkpoint") / "model.ckpt";
  save_checkpoint(ckpt, cp);
  const fs::path loss = g.dir("reports") / "loss.csv";
  write_loss_csv(ckpt.history, loss);
  json classes = json::object();
  for (const auto& [n, spec] : ckpt.bins) classes[n] = spec.total_classes();
  json summary{{"checkpoint", cp.string()},
               {"variant", to_string(tc.variant)},
               {"nutrients", tc.nutrients},
               {"classes", classes},
               {"train_items", ckpt.split.train_ids.size()},
               {"test_items", ckpt.split.test_ids.size()},
               {"steps", ckpt.history.size()},
               {"final_loss", ckpt.history.empty() ? json() : json(ckpt.history.back().loss)},
               {"seconds", seconds}};
  const fs::path sp = g.dir("reports") / "train.json";
  write_json(sp, summary);
  rec.output(cp);
  rec.output(loss);
  rec.output(sp);
  std::cout << "trained " << to_string(tc.variant) << " on " << ckpt.split.train_ids.size() << " items in " << seconds
            << " s, checkpoint " << cp.string() << "\n";
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, manifest, split = "test";
  std::size_t min_category = 30;
  std::vector<std::string> kinds;  // nutrient=risk|beneficial
  bool plots = true;
};

void run_eval(const Globals& g, const EvalArgs& a, RunRecord& rec) {
  const fs::path cp = default_checkpoint(g, a.checkpoint);
  const fs::path mp = default_manifest(g, a.manifest);
  rec.input(cp);
  rec.input(mp);
  const auto ckpt = load_checkpoint<Real>(cp);
  const Manifest m = load_manifest(mp);
  EvalOptions opt;
  opt.min_category_count = a.min_category;
  for (const auto& kv : a.kinds) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--kind expects nutrient=risk|beneficial, got '" + kv + "'");
    opt.kind_overrides[kv.substr(0, eq)] = nutrient_kind_from_string(kv.substr(eq + 1));
  }
  std::vector<ItemPrediction> preds;
  const EvalReport report = evaluate(ckpt, m, a.split, opt, &preds);

  const fs::path reports = g.dir("reports");
  const fs::path rp = reports / ("eval-" + a.split + ".json");
  write_json(rp, to_json(report));
  const fs::path pp = reports / ("predictions-" + a.split + ".csv");
  write_predictions_csv(preds, ckpt.bins, pp);
  rec.output(rp);
  rec.output(pp);
  if (a.plots) {
    for (const auto& [n, r] : report.nutrients) {
      const fs::path svg = reports / ("buckets-" + a.split + "-" + safe_name(n) + ".svg");
      write_text(svg, bucket_bars_svg(r));
      rec.output(svg);
    }
  }
  rec.config = {{"split", a.split}, {"min_category_count", a.min_category}, {"kinds", a.kinds}};
  for (const auto& [n, r] : report.nutrients) {
    std::cout << n << ": macro-AUC ";
    if (r.macro_auc) std::cout << *r.macro_auc;
    else std::cout << "n/a";
    std::cout << ", accuracy " << r.accuracy << ", " << r.items << " items\n";
  }
}

// --- gradcam / saliency ----------------------------------------------------

struct InterpretArgs {
  std::string checkpoint, manifest, id, image, text, nutrient, method = "grad-x-input";
  std::optional<std::size_t> cls;
  double alpha = 0.6;
};

struct Subject {
  std::string tag;
  std::optional<Image> image;
  std::optional<std::string> text;
};

Subject load_subject(const Globals& g, const InterpretArgs& a, RunRecord& rec) {
  Subject s;
  if (!a.id.empty()) {
    if (!a.image.empty()) throw ConfigError("give either --id or --image, not both");
    const fs::path mp = default_manifest(g, a.manifest);
    rec.input(mp);
    const Manifest m = load_manifest(mp);
    const FoodItem& item = find_item(m, a.id);
    s.tag = item.id;
    s.image = read_image(m.image_path(item).string());
    s.text = a.text.empty() ? item.ingredients : a.text;
    return s;
  }
  if (!a.image.empty()) {
    rec.input(a.image);
    s.image = read_image(a.image);
    s.tag = fs::path(a.image).stem().string();
  }
  if (!a.text.empty()) {
    s.text = a.text;
    if (s.tag.empty()) s.tag = "text-" + hash_bytes(a.text).substr(0, 8);
  }
  if (s.tag.empty()) throw ConfigError("need --id, --image or --text");
  return s;
}

ItemInput<Real> subject_input(const NutrientModel<Real>& model, const Subject& s) {
  ItemInput<Real> in;
  if (uses_image(model.variant)) {
    if (!s.image) throw ConfigError(to_string(model.variant) + " model needs an image (--id or --image)");
    in.image = model.prepare_image(*s.image);
  }
  if (uses_text(model.variant)) in.tokens = model.prepare_text(s.text.value_or(""));
  return in;
}

std::size_t resolve_class(const NutrientModel<Real>& model, const std::string& nutrient, const ItemInput<Real>& in,
                          std::optional<std::size_t> given) {
  return given ? *given : model.predict(nutrient, in).cls;
}

void run_gradcam(const Globals& g, const InterpretArgs& a, RunRecord& rec) {
  const fs::path cp = default_checkpoint(g, a.checkpoint);
  rec.input(cp);
  const auto ckpt = load_checkpoint<Real>(cp);
  const std::string nutrient = first_head(ckpt, a.nutrient);
  const Subject s = load_subject(g, a, rec);
  if (!s.image) throw ConfigError("gradcam needs an image (--id or --image)");
  const ItemInput<Real> in = subject_input(ckpt.model, s);
  const std::size_t cls = resolve_class(ckpt.model, nutrient, in, a.cls);
  const Heatmap h = gradcam(ckpt.model, *in.image, in, nutrient, cls);

  const std::string stem = "gradcam-" + safe_name(s.tag) + "-" + safe_name(nutrient);
  const fs::path dir = g.dir("overlays");
  json j = to_json(h);
  j["subject"] = s.tag;
  j["argmax_patch"] = h.argmax();
  write_json(dir / (stem + ".json"), j);
  write_png(render_overlay(*s.image, h, a.alpha), (dir / (stem + ".png")).string());
  rec.config = {{"nutrient", nutrient}, {"class", cls}, {"alpha", a.alpha}, {"subject", s.tag}};
  rec.output(dir / (stem + ".json"));
  rec.output(dir / (stem + ".png"));
  std::cout << nutrient << " class " << cls << ": peak at patch " << h.argmax() << " of " << h.values.size() << "\n";
}

void run_saliency(const Globals& g, const InterpretArgs& a, RunRecord& rec) {
  const fs::path cp = default_checkpoint(g, a.checkpoint);
  rec.input(cp);
  const auto ckpt = load_checkpoint<Real>(cp);
  const std::string nutrient = first_head(ckpt, a.nutrient);
  const SaliencyMethod method = saliency_method_from_string(a.method);
  const Subject s = load_subject(g, a, rec);
  if (!s.text) throw ConfigError("saliency needs an ingredient statement (--id or --text)");
  const ItemInput<Real> in = subject_input(ckpt.model, s);
  const std::size_t cls = resolve_class(ckpt.model, nutrient, in, a.cls);
  const TokenSaliency sal = text_saliency(ckpt.model, *s.text, in, nutrient, cls, method);

  const std::string stem = "saliency-" + safe_name(s.tag) + "-" + safe_name(nutrient);
  const fs::path dir = g.dir("overlays");
  json j = to_json(sal);
  j["subject"] = s.tag;
  j["method"] = a.method;
  write_json(dir / (stem + ".json"), j);
  write_text(dir / (stem + ".html"), render_overlay(sal));
  rec.config = {{"nutrient", nutrient}, {"class", cls}, {"method", a.method}, {"subject", s.tag}};
  rec.output(dir / (stem + ".json"));
  rec.output(dir / (stem + ".html"));
  if (!sal.warning.empty()) std::cerr << "warning: " << sal.warning << "\n";
  const auto words = sal.words();
  if (!words.empty()) {
    auto top = std::max_element(words.begin(), words.end(), [](auto& x, auto& y) { return x.weight < y.weight; });
    std::cout << nutrient << " class " << cls << ": top token '" << top->token << "'\n";
  }
}

// --- validate --------------------------------------------------------------

void run_validate(const Globals& g, const std::string& checkpoint, const std::string& manifest_arg,
                  const std::string& chem_path, bool include_fat, RunRecord& rec) {
  const fs::path cp = default_checkpoint(g, checkpoint);
  const fs::path mp = default_manifest(g, manifest_arg);
  rec.input(cp);
  rec.input(mp);
  rec.input(chem_path);
  const auto ckpt = load_checkpoint<Real>(cp);
  const Manifest m = load_manifest(mp);
  const auto chem = load_chem_csv(chem_path);

  std::set<std::string> wanted;
  for (const auto& c : chem) wanted.insert(c.id);
  std::vector<FoodItem> items;
  for (const auto& it : m.items)
    if (wanted.count(it.id)) items.push_back(it);
  std::map<ValueKey, double> model_values;
  if (!items.empty()) {
    for (const auto& p : predict_items(ckpt.model, m, items, ckpt.bins))
      model_values[{p.id, p.nutrient}] = ckpt.bins.at(p.nutrient).representative(p.predicted);
  }
  ThreeSourceOptions opt;
  opt.include_fat = include_fat;
  const ThreeSourceReport r = three_source_report(m.items, model_values, chem, opt);

  const fs::path reports = g.dir("reports");
  write_three_source_csv(r, reports / "three-source.csv");
  write_json(reports / "three-source.json", to_json(r));
  rec.config = {{"include_fat", include_fat}};
  rec.output(reports / "three-source.csv");
  rec.output(reports / "three-source.json");
  std::cout << r.rows.size() << " joined rows, " << r.unmatched.size() << " unmatched, fraction under 10%: "
            << r.summary() << "\n";
}

// --- report ----------------------------------------------------------------

void run_report(const Globals& g, RunRecord& rec) {
  const fs::path reports = fs::path(g.run_dir) / "reports";
  if (!fs::is_directory(reports)) throw IoError("no reports directory under '" + g.run_dir + "'");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(reports))
    if (e.path().extension() == ".json" && e.path().filename() != "summary.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DomainError("nothing to summarize in '" + reports.string() + "'");

  json summary{{"run_dir", g.run_dir}, {"version", kVersion}, {"sources", json::array()}};
  for (const auto& f : files) {
    rec.input(f);
    const json j = read_json(f);
    const std::string name = f.stem().string();
    summary["sources"].push_back(f.filename().string());
    if (name.rfind("eval-", 0) == 0) {
      for (const auto& [n, r] : j.at("nutrients").items()) {
        summary["eval"][name.substr(5)][n] = {{"macro_auc", r.value("macro_auc", json())},
                                              {"weighted_auc", r.value("weighted_auc", json())},
                                              {"accuracy", r.value("accuracy", json())},
                                              {"items", r.value("items", json())},
                                              {"tolerance_pass_rate", r.value("tolerance_pass_rate", json())}};
      }
    } else if (name == "three-source") {
      summary["three_source"] = j.at("summary");
    } else if (name == "train") {
      summary["train"] = j;
    } else if (name == "ingest") {
      summary["ingest"] = {{"items", j.value("items", json())}, {"problems", j.value("problems", json::array()).size()}};
    } else if (name.rfind("bin-", 0) == 0) {
      summary["bins"][name.substr(4)] = {{"classes", j.value("class_count", std::size_t{0}) + 1},
                                         {"threshold", j.value("threshold", json())}};
    }
  }
  const fs::path out = reports / "summary.json";
  write_json(out, summary);
  rec.output(out);
  std::cout << "summarized " << files.size() << " report(s) into " << out.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nutricast: nutrient-level classification from package images and ingredient statements"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Globals g;
  app.add_option("--config", g.config_path, "JSON config file (keys: seed, preset, model, train)")
      ->envname("NUTRICAST_CONFIG");
  g.seed_opt = app.add_option("--seed", g.seed, "Seed for all randomness")->envname("NUTRICAST_SEED");
  app.add_option("--threads", g.threads, "Worker cap (the current build runs single-threaded)")
      ->envname("NUTRICAST_THREADS")
      ->check(CLI::PositiveNumber);
  app.add_option("--run-dir", g.run_dir, "Output directory")->envname("NUTRICAST_RUN_DIR");
  g.preset_opt = app.add_option("--preset", g.preset, "Model size: full or tiny")
                     ->envname("NUTRICAST_PRESET")
                     ->check(CLI::IsMember({"full", "tiny"}));

  auto sub = [&](const char* name, const char* help) {
    CLI::App* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };

  SynthArgs synth_args;
  CLI::App* synth_cmd = sub("synth", "Generate a synthetic product set with known nutrient rules");
  synth_cmd->add_option("--n", synth_args.n, "Number of products")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--out", synth_args.out, "Output directory (default <run-dir>/synth)");
  synth_cmd->add_option("--resolution", synth_args.opt.resolution, "Image side in pixels");
  synth_cmd->add_option("--cell", synth_args.opt.cell, "Glyph cell side in pixels");
  synth_cmd->add_option("--sticker-probability", synth_args.opt.sticker_probability)->check(CLI::Range(0.0, 1.0));

  std::string ingest_manifest;
  bool ingest_lenient = false;
  CLI::App* ingest_cmd = sub("ingest", "Validate a manifest and store it under <run-dir>/data");
  ingest_cmd->add_option("--manifest", ingest_manifest, "JSON-lines manifest")->required();
  ingest_cmd->add_flag("--lenient", ingest_lenient, "Drop bad lines instead of failing");

  std::string bin_manifest, bin_nutrient;
  std::optional<std::size_t> bin_k;
  double bin_percentile = 0.95;
  CLI::App* bin_cmd = sub("bin", "Fit the class binning for one nutrient");
  bin_cmd->add_option("--manifest", bin_manifest);
  bin_cmd->add_option("--nutrient", bin_nutrient)->required();
  bin_cmd->add_option("--k", bin_k, "Override the number of non-zero classes");
  bin_cmd->add_option("--percentile", bin_percentile, "Outlier threshold percentile");

  TrainArgs train_args;
  CLI::App* train_cmd = sub("train", "Train a model and write checkpoint/model.ckpt");
  train_cmd->add_option("--manifest", train_args.manifest);
  train_cmd->add_option("--variant", train_args.variant, "VL, VF, LF or VLF")->envname("NUTRICAST_VARIANT");
  train_cmd->add_option("--nutrient", train_args.nutrients, "Nutrient channel (repeatable)");
  train_cmd->add_option("--epochs", train_args.epochs)->envname("NUTRICAST_EPOCHS");
  train_cmd->add_option("--batch-size", train_args.batch_size)->envname("NUTRICAST_BATCH_SIZE");
  train_cmd->add_option("--patience", train_args.patience);
  train_cmd->add_option("--k", train_args.k);
  train_cmd->add_option("--lr-head", train_args.lr_head);
  train_cmd->add_option("--lr-encoders", train_args.lr_encoders);
  train_cmd->add_option("--split-ratio", train_args.split_ratio);
  train_cmd->add_option("--contrastive-weight", train_args.contrastive_weight);
  train_cmd->add_flag("--quiet", train_args.quiet, "No per-epoch progress on stderr");

  EvalArgs eval_args;
  CLI::App* eval_cmd = sub("eval", "Evaluate a checkpoint on its train or test split");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint);
  eval_cmd->add_option("--manifest", eval_args.manifest);
  eval_cmd->add_option("--split", eval_args.split)->check(CLI::IsMember({"train", "test", "all"}));
  eval_cmd->add_option("--min-category-count", eval_args.min_category);
  eval_cmd->add_option("--kind", eval_args.kinds, "Tolerance rule override, nutrient=risk|beneficial");
  eval_cmd->add_flag("!--no-plots", eval_args.plots, "Skip the SVG bucket charts");

  InterpretArgs interp;
  auto interpret_opts = [&](CLI::App* c) {
    c->add_option("--checkpoint", interp.checkpoint);
    c->add_option("--manifest", interp.manifest);
    c->add_option("--id", interp.id, "Item id from the manifest");
    c->add_option("--image", interp.image, "Image file");
    c->add_option("--text", interp.text, "Ingredient statement");
    c->add_option("--nutrient", interp.nutrient);
    c->add_option("--class", interp.cls, "Target class (default: predicted)");
  };
  CLI::App* gradcam_cmd = sub("gradcam", "Patch heatmap for one image");
  interpret_opts(gradcam_cmd);
  gradcam_cmd->add_option("--alpha", interp.alpha, "Overlay strength")->check(CLI::Range(0.0, 1.0));
  CLI::App* saliency_cmd = sub("saliency", "Token weights for one ingredient statement");
  interpret_opts(saliency_cmd);
  saliency_cmd->add_option("--method", interp.method)->check(CLI::IsMember({"grad-x-input", "gradient", "attention"}));

  std::string val_checkpoint, val_manifest, val_chem;
  bool val_fat = false;
  CLI::App* validate_cmd = sub("validate", "Compare database, model and chemical analysis values");
  validate_cmd->add_option("--checkpoint", val_checkpoint);
  validate_cmd->add_option("--manifest", val_manifest);
  validate_cmd->add_option("--chem", val_chem, "CSV id,nutrient,chem_mean,chem_sd,method[,unit]")->required();
  validate_cmd->add_flag("--include-fat", val_fat, "Keep the fat channel in the comparison");

  CLI::App* report_cmd = sub("report", "Collect the JSON reports of a run into reports/summary.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  RunRecord rec;
  rec.argv.assign(argv, argv + argc);
  try {
    g.load_config();
    fs::create_directories(g.run_dir);
    if (*synth_cmd) rec.command = "synth", run_synth(g, synth_args, rec);
    else if (*ingest_cmd) rec.command = "ingest", run_ingest(g, ingest_manifest, ingest_lenient, rec);
    else if (*bin_cmd) rec.command = "bin", run_bin(g, bin_manifest, bin_nutrient, bin_k, bin_percentile, rec);
    else if (*train_cmd) rec.command = "train", run_train(g, train_args, rec);
    else if (*eval_cmd) rec.command = "eval", run_eval(g, eval_args, rec);
    else if (*gradcam_cmd) rec.command = "gradcam", run_gradcam(g, interp, rec);
    else if (*saliency_cmd) rec.command = "saliency", run_saliency(g, interp, rec);
    else if (*validate_cmd) rec.command = "validate", run_validate(g, val_checkpoint, val_manifest, val_chem, val_fat, rec);
    else if (*report_cmd) rec.command = "report", run_report(g, rec);
    rec.commit(g);
  } catch (const Error& e) {
    std::cerr << "error[" << e.kind() << "]: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error[config]: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error[io]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
