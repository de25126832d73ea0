#include "satrefine/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "satrefine/errors.hpp"
#include "satrefine/features.hpp"
#include "satrefine/image.hpp"
#include "satrefine/mmd.hpp"
#include "satrefine/nets.hpp"
#include "satrefine/random.hpp"
#include "satrefine/toy.hpp"
#include "satrefine/trainer.hpp"
#include "satrefine/tsne.hpp"

namespace satrefine {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// Angle draws that do not fit before falling back to 0°.
constexpr int kAngleAttempts = 16;

std::string index_name(std::size_t i) {
  std::ostringstream s;
  s.width(5);
  s.fill('0');
  s << i;
  return s.str() + ".png";
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

SampleSet load_dir(const fs::path& dir, SampleRole role, std::vector<fs::path>* names = nullptr) {
  const auto files = list_pngs(dir);
  if (files.empty()) throw IoError("no PNG images in " + dir.string());
  SampleSet set{role, {}};
  for (const auto& f : files) set.patches.push_back(read_png(f));
  set.validate();
  if (names) *names = files;
  return set;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

// A path names either an SRFT file or a directory of images, which is
// turned into fallback features.
FeatureSet load_features(const fs::path& path, SampleRole role) {
  if (fs::is_directory(path)) {
    FeatureSet set = fallback_extract(load_dir(path, role));
    set.role = role_name(role);
    return set;
  }
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  return read_feat(path, role_name(role));
}

SampleMatrix take_rows(const SampleMatrix& m, std::span<const std::size_t> rows) {
  SampleMatrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

// The real set is reduced to |X| rows, drawn without replacement, only when
// it is larger; otherwise it is used as given.
SampleMatrix real_subsample(const SampleMatrix& y, std::size_t k, std::uint64_t seed) {
  if (k >= y.rows()) return y;
  Rng rng = derive_rng(seed, 0x53);
  return take_rows(y, sample_without_replacement(y.rows(), k, rng));
}

SampleMatrix shuffled(const SampleMatrix& m, std::uint64_t seed, std::uint64_t stream) {
  Rng rng = derive_rng(seed, stream);
  return take_rows(m, sample_without_replacement(m.rows(), m.rows(), rng));
}

struct EvalInputs {
  std::string x;
  std::string xhat;
  std::string y;
  std::optional<std::size_t> subsample;
  std::uint64_t subsample_seed = 0;
};

struct EvalSets {
  FeatureSet x;
  FeatureSet xhat;
  FeatureSet ytilde;
};

EvalSets load_eval_sets(const EvalInputs& in) {
  EvalSets s{load_features(in.x, SampleRole::synthetic),
             load_features(in.xhat, SampleRole::refined),
             load_features(in.y, SampleRole::real)};
  if (s.x.matrix.cols() != s.xhat.matrix.cols() || s.x.matrix.cols() != s.ytilde.matrix.cols())
    throw ContractError("feature dimensions differ: " + std::to_string(s.x.matrix.cols()) + ", " +
                        std::to_string(s.xhat.matrix.cols()) + ", " +
                        std::to_string(s.ytilde.matrix.cols()));
  const std::size_t k = in.subsample.value_or(s.x.matrix.rows());
  if (k < 1) throw ContractError("--subsample must be >= 1");
  s.ytilde.matrix = real_subsample(s.ytilde.matrix, k, in.subsample_seed);
  s.ytilde.role = role_name(SampleRole::real_subsample);
  return s;
}

ordered_json sigmas_json(const KernelSpec& spec) {
  ordered_json a = ordered_json::array();
  for (double s : spec.sigmas) a.push_back(s);
  return a;
}

ordered_json estimate_json(const std::string& pair, const MMDEstimate& e) {
  ordered_json j;
  j["pair"] = pair;
  j["estimator"] = estimator_name(e.kind);
  j["mmd2"] = e.mmd2;
  j["mmd"] = e.mmd;
  j["stderr"] = e.std_error;
  j["pairs_used"] = e.pairs_used;
  j["sigmas"] = sigmas_json(e.kernel);
  return j;
}

// Appends `--key=value` for every config entry whose flag is not already on
// the command line, and strips `--config FILE` itself.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> config;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!config) return args;

  std::ifstream f(*config);
  if (!f) throw IoError("cannot open config file " + *config);
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  std::string line;
  while (std::getline(f, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ContractError("config line without '=': " + line);
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    while (!key.empty() && key[0] == '-') key.erase(0, 1);
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin() + 1, args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!given) args.push_back(flag + "=" + value);
  }
  return args;
}

int cmd_gen_toy(const ToySpec& spec, const fs::path& out_dir, std::ostream& out) {
  const ToyData data = generate_toy(spec);
  for (const auto& [sub, set] : {std::pair{"source", &data.source}, {"target", &data.target}}) {
    const fs::path dir = out_dir / sub;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < set->size(); ++i) write_png(dir / index_name(i), set->patches[i]);
  }
  out << "wrote " << data.source.size() << " source and " << data.target.size()
      << " target patches to " << out_dir.string() << "\n";
  return kExitOk;
}

struct ComposeArgs {
  std::string backgrounds;
  std::string sprites;
  std::string out;
  std::size_t count = 0;
  std::uint64_t seed = 0;
};

int cmd_compose(const ComposeArgs& a, std::ostream& out) {
  const auto bg_files = list_pngs(a.backgrounds);
  const auto sprite_files = list_pngs(a.sprites);
  if (bg_files.empty()) throw IoError("no background PNGs in " + a.backgrounds);
  if (sprite_files.empty()) throw IoError("no sprite PNGs in " + a.sprites);
  std::vector<ImagePatch> bgs;
  for (const auto& f : bg_files) bgs.push_back(read_png(f, true));
  std::vector<Sprite> sprites;
  for (const auto& f : sprite_files) sprites.push_back(read_sprite_png(f));

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t b = 0; b < bgs.size(); ++b)
    for (std::size_t s = 0; s < sprites.size(); ++s)
      if (sprites[s].width() <= bgs[b].width() && sprites[s].height() <= bgs[b].height())
        pairs.emplace_back(b, s);
  if (a.count > 0 && pairs.empty())
    throw PlacementError("no sprite fits inside any background");

  const fs::path out_dir = a.out;
  fs::create_directories(out_dir);
  Rng rng = derive_rng(a.seed, 0xC0);
  ordered_json items = ordered_json::array();
  for (std::size_t i = 0; i < a.count; ++i) {
    const auto [b, s] = pairs[uniform_index(rng, pairs.size())];
    const ImagePatch& bg = bgs[b];
    const Sprite& sprite = sprites[s];
    double angle = 0.0;
    std::array<std::size_t, 2> ext{sprite.width(), sprite.height()};
    for (int attempt = 0; attempt < kAngleAttempts; ++attempt) {
      const double candidate = uniform(rng, 0.0, 360.0);
      const auto e = rotated_extent(sprite.width(), sprite.height(), candidate);
      if (e[0] <= bg.width() && e[1] <= bg.height()) {
        angle = candidate;
        ext = e;
        break;
      }
    }
    PlacementSpec p;
    p.x = static_cast<std::ptrdiff_t>(uniform_index(rng, bg.width() - ext[0] + 1));
    p.y = static_cast<std::ptrdiff_t>(uniform_index(rng, bg.height() - ext[1] + 1));
    p.angle = angle;
    const std::string name = index_name(i);
    write_png(out_dir / name, composite(bg, sprite, p));

    ordered_json item;
    item["file"] = name;
    item["background"] = bg_files[b].filename().string();
    item["sprite"] = sprite_files[s].filename().string();
    item["placement"] = {{"x", p.x}, {"y", p.y}};
    item["angle"] = p.angle;
    items.push_back(std::move(item));
  }
  ordered_json manifest;
  manifest["seed"] = a.seed;
  manifest["count"] = a.count;
  manifest["items"] = std::move(items);
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  out << "composed " << a.count << " patches into " << out_dir.string() << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string synthetic;
  std::string real;
  std::string checkpoint;
  std::string log;
  std::string optimizer = "adam";
  TrainConfig config;
};

int cmd_train(TrainArgs a, std::ostream& out, std::ostream& err) {
  a.config.refiner_optimizer.kind =
      a.optimizer == "sgd" ? ad::OptimizerKind::sgd : ad::OptimizerKind::adam;
  a.config.discriminator_optimizer.kind = a.config.refiner_optimizer.kind;
  a.config.discriminator.width = a.config.refiner.width;
  const SampleSet x = load_dir(a.synthetic, SampleRole::synthetic);
  const SampleSet y = load_dir(a.real, SampleRole::real);
  a.config.refiner.channels = x.patches.front().channels();
  a.config.discriminator.channels = a.config.refiner.channels;

  const fs::path log_path = a.log.empty() ? fs::path(a.checkpoint + ".losses.ndjson") : fs::path(a.log);
  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
  if (!log) throw IoError("cannot open " + log_path.string() + " for writing");
  try {
    const TrainResult r = train(x, y, a.config, [&](const LossRecord& rec) {
      log << to_json_line(rec) << "\n";
    });
    log.close();
    const fs::path ckpt = a.checkpoint;
    if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
    save_checkpoint(ckpt, r.refiner, r.discriminator, &r.refiner_optimizer,
                    &r.discriminator_optimizer);
    out << "trained " << r.state.step << " steps; L_R " << r.state.last.refiner_loss << ", L_D "
        << r.state.last.discriminator_loss << "\n";
  } catch (const DivergenceError& e) {
    log.flush();
    err << "training diverged: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}

struct NetArgs {
  std::size_t width = 16;
  std::size_t blocks = 2;
};

int cmd_refine(const std::string& checkpoint, const std::string& input, const std::string& out_dir,
               const NetArgs& net, std::ostream& out) {
  std::vector<fs::path> names;
  const SampleSet x = load_dir(input, SampleRole::synthetic, &names);
  RefinerConfig rc;
  rc.channels = x.patches.front().channels();
  rc.width = net.width;
  rc.blocks = net.blocks;
  DiscriminatorConfig dc;
  dc.channels = rc.channels;
  dc.width = net.width;
  if (!fs::exists(checkpoint)) throw IoError("no such checkpoint: " + checkpoint);
  const ModelCheckpoint model = load_checkpoint(checkpoint, rc, dc);
  const SampleSet refined = refine_dataset(model.refiner, x);
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < refined.size(); ++i)
    write_png(fs::path(out_dir) / names[i].filename(), refined.patches[i]);
  out << "refined " << refined.size() << " patches into " << out_dir << "\n";
  return kExitOk;
}

int cmd_features(const std::string& images, const std::string& out_path, std::ostream& out) {
  const FeatureSet set = fallback_extract(load_dir(images, SampleRole::synthetic));
  const fs::path p = out_path;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_feat(p, set);
  out << "wrote " << set.matrix.rows() << "x" << set.matrix.cols() << " features to " << out_path
      << "\n";
  return kExitOk;
}

struct MmdArgs {
  EvalInputs inputs;
  std::string out;
  std::string estimator = "linear";
  std::optional<std::uint64_t> shuffle;
};

int cmd_eval_mmd(const MmdArgs& a, std::ostream& out) {
  EvalSets s = load_eval_sets(a.inputs);
  if (a.shuffle) {
    s.x.matrix = shuffled(s.x.matrix, *a.shuffle, 1);
    s.xhat.matrix = shuffled(s.xhat.matrix, *a.shuffle, 2);
    s.ytilde.matrix = shuffled(s.ytilde.matrix, *a.shuffle, 3);
  }
  const KernelSpec spec = default_kernel_spec();
  const std::pair<const char*, std::pair<const SampleMatrix*, const SampleMatrix*>> pairs[] = {
      {"X_vs_Xhat", {&s.x.matrix, &s.xhat.matrix}},
      {"X_vs_Ytilde", {&s.x.matrix, &s.ytilde.matrix}},
      {"Xhat_vs_Ytilde", {&s.xhat.matrix, &s.ytilde.matrix}}};

  ordered_json results = ordered_json::array();
  for (const auto& [name, mats] : pairs) {
    if (a.estimator == "linear" || a.estimator == "both") {
      const MMDEstimate e = mmd2_linear(*mats.first, *mats.second, spec);
      results.push_back(estimate_json(name, e));
      out << name << " linear mmd2=" << e.mmd2 << " stderr=" << e.std_error << "\n";
    }
    if (a.estimator == "quadratic" || a.estimator == "both") {
      const MMDEstimate e = mmd2_quadratic_unbiased(*mats.first, *mats.second, spec);
      results.push_back(estimate_json(name, e));
      out << name << " quadratic mmd2=" << e.mmd2 << " stderr=" << e.std_error << "\n";
    }
  }
  ordered_json report;
  report["counts"] = {{"X", s.x.matrix.rows()},
                      {"Xhat", s.xhat.matrix.rows()},
                      {"Ytilde", s.ytilde.matrix.rows()}};
  report["dim"] = s.x.matrix.cols();
  report["feature_source"] = source_name(s.x.source);
  report["results"] = std::move(results);
  write_text(a.out, report.dump(2) + "\n");
  return kExitOk;
}

struct TsneArgs {
  EvalInputs inputs;
  std::string csv;
  std::string summary;
  tsne::TsneConfig config;
};

int cmd_eval_tsne(const TsneArgs& a, std::ostream& out) {
  const EvalSets s = load_eval_sets(a.inputs);
  const SampleMatrix* parts[] = {&s.x.matrix, &s.xhat.matrix, &s.ytilde.matrix};
  const SampleMatrix joint = vstack(parts);
  std::vector<std::string> labels;
  for (const FeatureSet* f : {&s.x, &s.xhat, &s.ytilde})
    labels.insert(labels.end(), f->matrix.rows(), f->role);

  const tsne::Embedding e = tsne::tsne_run(joint, labels, a.config);

  std::ostringstream csv;
  csv.precision(17);
  csv << "index,label,y1,y2\n";
  for (std::size_t i = 0; i < e.size(); ++i)
    csv << i << "," << e.labels[i] << "," << e.points[2 * i] << "," << e.points[2 * i + 1] << "\n";
  write_text(a.csv, csv.str());

  const std::string order[] = {s.x.role, s.xhat.role, s.ytilde.role};
  ordered_json means;
  for (const auto& [label, p] : tsne::set_means(e, order)) means[label] = {p[0], p[1]};
  ordered_json summary;
  summary["kl_final"] = e.kl_final;
  summary["iterations"] = e.kl_history.size();
  summary["set_means"] = means;
  write_text(a.summary, summary.dump(2) + "\n");
  out << "embedded " << e.size() << " points; KL " << e.kl_final << "\n";
  return kExitOk;
}

void add_eval_inputs(CLI::App* cmd, EvalInputs& in) {
  cmd->add_option("--x", in.x, "Synthetic set: SRFT file or image directory")->required();
  cmd->add_option("--xhat", in.xhat, "Refined set: SRFT file or image directory")->required();
  cmd->add_option("--y", in.y, "Real set: SRFT file or image directory")->required();
  cmd->add_option("--subsample", in.subsample,
                  "Rows drawn from the real set (default: size of X)");
  cmd->add_option("--subsample-seed", in.subsample_seed, "Seed for the real-set subsample");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv, argv + argc);
  if (args.empty()) args.emplace_back("satrefine");
  try {
    args = expand_config(std::move(args));
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  CLI::App app{"Sprite compositing, adversarial refinement and domain-gap evaluation",
               "satrefine"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  app.footer("Any subcommand accepts --config FILE with key=value lines; flags win.");

  ToySpec toy;
  std::string toy_out;
  auto* gen = app.add_subcommand("gen-toy", "Write the two seeded toy domains as PNG");
  gen->add_option("--out", toy_out, "Output directory (gets source/ and target/)")->required();
  gen->add_option("--source-count", toy.source_count, "Source patches")->capture_default_str();
  gen->add_option("--target-count", toy.target_count, "Target patches")->capture_default_str();
  gen->add_option("--size", toy.patch_size, "Patch side in pixels")->capture_default_str();
  gen->add_option("--seed", toy.seed, "Seed")->capture_default_str();
  gen->add_option("--ramp-min", toy.ramp_min, "Smallest target ramp amplitude")
      ->capture_default_str();
  gen->add_option("--ramp-max", toy.ramp_max, "Largest target ramp amplitude")
      ->capture_default_str();
  gen->add_option("--texture-std", toy.texture_std, "Target texture std")->capture_default_str();

  ComposeArgs compose;
  auto* comp = app.add_subcommand("compose", "Paste sprites onto backgrounds at random placements");
  comp->add_option("--bg", compose.backgrounds, "Background PNG directory")->required();
  comp->add_option("--sprites", compose.sprites, "Sprite PNG directory")->required();
  comp->add_option("--out", compose.out, "Output directory")->required();
  comp->add_option("--count", compose.count, "Patches to write")->required();
  comp->add_option("--seed", compose.seed, "Seed")->capture_default_str();

  TrainArgs train_args;
  TrainConfig& tc = train_args.config;
  auto* tr = app.add_subcommand("train", "Train refiner and discriminator");
  tr->add_option("--synthetic", train_args.synthetic, "Synthetic PNG directory")->required();
  tr->add_option("--real", train_args.real, "Real PNG directory")->required();
  tr->add_option("--out", train_args.checkpoint, "Checkpoint path")->required();
  tr->add_option("--log", train_args.log, "Loss log (default: <out>.losses.ndjson)");
  tr->add_option("--steps", tc.max_steps, "Training steps")->capture_default_str();
  tr->add_option("--lambda", tc.lambda, "Identity weight")->capture_default_str();
  tr->add_option("--batch", tc.batch_size, "Batch size")->capture_default_str();
  tr->add_option("--seed", tc.seed, "Seed")->capture_default_str();
  tr->add_option("--lr", tc.refiner_optimizer.learning_rate, "Learning rate")
      ->capture_default_str();
  tr->add_option("--optimizer", train_args.optimizer, "adam or sgd")
      ->check(CLI::IsMember({"adam", "sgd"}))
      ->capture_default_str();
  tr->add_option("--history", tc.history_buffer_size, "Refined-image history pool size")
      ->capture_default_str();
  tr->add_flag("--l1-sum", tc.l1_sum, "Identity term as the raw L1 sum");
  tr->add_option("--refiner-updates", tc.refiner_updates, "Refiner updates per step")
      ->capture_default_str();
  tr->add_option("--discriminator-updates", tc.discriminator_updates,
                 "Discriminator updates per step")
      ->capture_default_str();
  tr->add_option("--log-every", tc.log_every, "Steps between loss records")
      ->capture_default_str();
  tr->add_option("--width", tc.refiner.width, "Feature channels")->capture_default_str();
  tr->add_option("--blocks", tc.refiner.blocks, "Residual blocks")->capture_default_str();

  NetArgs net;
  std::string ref_ckpt, ref_in, ref_out;
  auto* ref = app.add_subcommand("refine", "Apply a trained refiner to a directory");
  ref->add_option("--checkpoint", ref_ckpt, "Checkpoint path")->required();
  ref->add_option("--input", ref_in, "Synthetic PNG directory")->required();
  ref->add_option("--out", ref_out, "Output directory")->required();
  ref->add_option("--width", net.width, "Feature channels")->capture_default_str();
  ref->add_option("--blocks", net.blocks, "Residual blocks")->capture_default_str();

  std::string feat_in, feat_out;
  auto* feat = app.add_subcommand("features", "Extract fallback features to an SRFT file");
  feat->add_option("--images", feat_in, "PNG directory")->required();
  feat->add_option("--out", feat_out, "SRFT output path")->required();

  MmdArgs mmd;
  std::uint64_t shuffle_seed = 0;
  auto* em = app.add_subcommand("eval-mmd", "MMD report for X/Xhat/Ytilde");
  add_eval_inputs(em, mmd.inputs);
  em->add_option("--out", mmd.out, "JSON report path")->required();
  em->add_option("--estimator", mmd.estimator, "linear, quadratic or both")
      ->check(CLI::IsMember({"linear", "quadratic", "both"}))
      ->capture_default_str();
  auto* shuffle_opt =
      em->add_option("--shuffle", shuffle_seed, "Shuffle rows with this seed before pairing");

  TsneArgs ts;
  auto* et = app.add_subcommand("eval-tsne", "Joint t-SNE embedding of X/Xhat/Ytilde");
  add_eval_inputs(et, ts.inputs);
  et->add_option("--csv", ts.csv, "Embedding CSV path")->required();
  et->add_option("--summary", ts.summary, "JSON summary path")->required();
  et->add_option("--perplexity", ts.config.perplexity, "Perplexity")->capture_default_str();
  et->add_option("--iterations", ts.config.iterations, "Iterations")->capture_default_str();
  et->add_option("--learning-rate", ts.config.learning_rate, "Learning rate")
      ->capture_default_str();
  et->add_option("--seed", ts.config.seed, "Seed")->capture_default_str();
  et->add_option("--pca", ts.config.pca_dims, "Principal components kept first (0: off)")
      ->capture_default_str();

  try {
    std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_toy(toy, toy_out, out);
    if (*comp) return cmd_compose(compose, out);
    if (*tr) {
      tc.discriminator_optimizer.learning_rate = tc.refiner_optimizer.learning_rate;
      return cmd_train(train_args, out, err);
    }
    if (*ref) return cmd_refine(ref_ckpt, ref_in, ref_out, net, out);
    if (*feat) return cmd_features(feat_in, feat_out, out);
    if (*em) {
      if (shuffle_opt->count() > 0) mmd.shuffle = shuffle_seed;
      return cmd_eval_mmd(mmd, out);
    }
    if (*et) return cmd_eval_tsne(ts, out);
  } catch (const DivergenceError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const LossError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitUsage;
}

int run_cli(int argc, const char* const* argv) { return run_cli(argc, argv, std::cout, std::cerr); }

}  // namespace satrefine
