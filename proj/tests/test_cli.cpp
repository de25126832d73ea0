#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "satrefine/cli.hpp"
#include "satrefine/features.hpp"
#include "satrefine/image.hpp"
#include "satrefine/nets.hpp"
#include "support.hpp"

using namespace satrefine;
using nlohmann::json;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::initializer_list<std::string> args) {
  std::vector<std::string> owned{"satrefine"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : owned) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

// Small toy domains for the pipeline commands.
fs::path make_toy(const TempDir& dir, const std::string& seed = "3") {
  const Run r = run({"gen-toy", "--out", (dir / "toy").string(), "--source-count", "6",
                     "--target-count", "6", "--size", "16", "--seed", seed});
  REQUIRE(r.code == kExitOk);
  return dir / "toy";
}

void write_sprite(const fs::path& p, std::size_t w, std::size_t h) {
  ImagePatch img(w, h, 3, 0.8f);
  write_png(p, img);
}

}  // namespace

TEST_CASE("gen-toy is byte-identical per seed") {
  TempDir a("cli"), b("cli"), c("cli");
  for (const TempDir* d : {&a, &b})
    REQUIRE(run({"gen-toy", "--out", d->path().string(), "--source-count", "5",
                 "--target-count", "4", "--size", "16", "--seed", "7"})
                .code == kExitOk);
  REQUIRE(run({"gen-toy", "--out", c.path().string(), "--source-count", "5", "--target-count",
               "4", "--size", "16", "--seed", "8"})
              .code == kExitOk);
  const auto ta = testing::tree(a.path());
  CHECK(ta.size() == 9);
  CHECK(ta == testing::tree(b.path()));
  CHECK(ta != testing::tree(c.path()));
  CHECK(fs::exists(a / "source/00000.png"));
  CHECK(fs::exists(a / "target/00003.png"));
  const ImagePatch p = read_png(a / "source/00000.png");
  CHECK(p.width() == 16);
  CHECK(p.channels() == 3);
}

TEST_CASE("compose") {
  TempDir dir("cli");
  fs::create_directories(dir / "bg");
  fs::create_directories(dir / "sp");
  Rng rng = derive_rng(1, 0);
  for (int i = 0; i < 2; ++i) {
    ImagePatch bg(10, 10, 3);
    for (float& v : bg.pixels()) v = uniform_f32(rng, 0.0f, 1.0f);
    write_png(dir / ("bg/b" + std::to_string(i) + ".png"), bg);
  }
  write_sprite(dir / "sp/plane.png", 4, 4);

  SUBCASE("count 0 writes an empty manifest") {
    const Run r = run({"compose", "--bg", (dir / "bg").string(), "--sprites",
                       (dir / "sp").string(), "--out", (dir / "o").string(), "--count", "0"});
    CHECK(r.code == kExitOk);
    const json m = read_json(dir / "o/manifest.json");
    CHECK(m["count"] == 0);
    CHECK(m["items"].empty());
    CHECK(testing::tree(dir / "o").size() == 1);
  }
  SUBCASE("same seed, same bytes; placements stay inside") {
    for (const char* o : {"o1", "o2"})
      REQUIRE(run({"compose", "--bg", (dir / "bg").string(), "--sprites", (dir / "sp").string(),
                   "--out", (dir / o).string(), "--count", "12", "--seed", "4"})
                  .code == kExitOk);
    CHECK(testing::tree(dir / "o1") == testing::tree(dir / "o2"));
    const json m = read_json(dir / "o1/manifest.json");
    REQUIRE(m["items"].size() == 12);
    for (const auto& item : m["items"]) {
      const double angle = item["angle"];
      const auto ext = rotated_extent(4, 4, angle);
      const long x = item["placement"]["x"], y = item["placement"]["y"];
      CHECK(x >= 0);
      CHECK(y >= 0);
      CHECK(x + static_cast<long>(ext[0]) <= 10);
      CHECK(y + static_cast<long>(ext[1]) <= 10);
      if (angle == 0.0) {
        CHECK(x < 7);  // the 7×7 grid of upright placements
        CHECK(y < 7);
      }
      CHECK(fs::exists(dir / "o1" / item["file"].get<std::string>()));
    }
    REQUIRE(run({"compose", "--bg", (dir / "bg").string(), "--sprites", (dir / "sp").string(),
                 "--out", (dir / "o3").string(), "--count", "12", "--seed", "5"})
                .code == kExitOk);
    CHECK(testing::tree(dir / "o1") != testing::tree(dir / "o3"));
  }
  SUBCASE("nothing fits") {
    fs::create_directories(dir / "big");
    write_sprite(dir / "big/huge.png", 11, 4);
    const Run r = run({"compose", "--bg", (dir / "bg").string(), "--sprites",
                       (dir / "big").string(), "--out", (dir / "o").string(), "--count", "1"});
    CHECK(r.code == kExitInput);
    CHECK(r.err.find("error") != std::string::npos);
  }
}

TEST_CASE("train, refine and features") {
  TempDir dir("cli");
  const fs::path toy = make_toy(dir);
  const std::string src = (toy / "source").string(), tgt = (toy / "target").string();

  std::vector<std::vector<unsigned char>> ckpts, logs;
  for (const char* name : {"a.ckpt", "b.ckpt"}) {
    const Run r = run({"train", "--synthetic", src, "--real", tgt, "--out", (dir / name).string(),
                       "--steps", "6", "--seed", "2", "--width", "4", "--blocks", "1"});
    REQUIRE(r.code == kExitOk);
    ckpts.push_back(testing::slurp(dir / name));
    logs.push_back(testing::slurp(dir / (std::string(name) + ".losses.ndjson")));
  }
  CHECK(ckpts[0] == ckpts[1]);
  CHECK(logs[0] == logs[1]);
  const auto log = lines(dir / "a.ckpt.losses.ndjson");
  REQUIRE(log.size() == 6);
  CHECK(json::parse(log[5])["step"] == 6);

  const Run other = run({"train", "--synthetic", src, "--real", tgt, "--out",
                         (dir / "c.ckpt").string(), "--steps", "6", "--seed", "3", "--width",
                         "4", "--blocks", "1"});
  REQUIRE(other.code == kExitOk);
  CHECK(testing::slurp(dir / "c.ckpt") != ckpts[0]);

  const Run ref = run({"refine", "--checkpoint", (dir / "a.ckpt").string(), "--input", src,
                       "--out", (dir / "refined").string(), "--width", "4", "--blocks", "1"});
  REQUIRE(ref.code == kExitOk);
  std::vector<std::string> in_names, out_names;
  for (const auto& [n, b] : testing::tree(toy / "source")) in_names.push_back(n);
  for (const auto& [n, b] : testing::tree(dir / "refined")) out_names.push_back(n);
  CHECK(in_names == out_names);

  // Wrong architecture for the checkpoint.
  CHECK(run({"refine", "--checkpoint", (dir / "a.ckpt").string(), "--input", src, "--out",
             (dir / "r2").string()})
            .code == kExitInput);

  const Run feat =
      run({"features", "--images", src, "--out", (dir / "x.srft").string()});
  REQUIRE(feat.code == kExitOk);
  const FeatureSet fs = read_feat(dir / "x.srft");
  CHECK(fs.matrix.rows() == 6);
  CHECK(fs.matrix.cols() == 256);
}

TEST_CASE("eval-mmd and eval-tsne") {
  TempDir dir("cli");
  Rng rng = derive_rng(5, 0);
  SampleMatrix m(40, 5);
  for (float& v : m.data()) v = static_cast<float>(normal(rng));
  const fs::path f = dir / "same.srft";
  write_feat(f, FeatureSet{"X", m});

  const Run r = run({"eval-mmd", "--x", f.string(), "--xhat", f.string(), "--y", f.string(),
                     "--out", (dir / "mmd.json").string()});
  REQUIRE(r.code == kExitOk);
  const json rep = read_json(dir / "mmd.json");
  CHECK(rep["counts"]["X"] == 40);
  CHECK(rep["dim"] == 5);
  CHECK(rep["feature_source"] == "external-fc6");
  REQUIRE(rep["results"].size() == 3);
  const char* pairs[] = {"X_vs_Xhat", "X_vs_Ytilde", "Xhat_vs_Ytilde"};
  for (int i = 0; i < 3; ++i) {
    const auto& e = rep["results"][i];
    CHECK(e["pair"] == pairs[i]);
    CHECK(e["estimator"] == "linear-unbiased");
    CHECK(e["mmd2"] == 0.0);
    CHECK(e["mmd"] == 0.0);
    CHECK(e["pairs_used"] == 20);
    CHECK(e["sigmas"].size() == 16);
  }

  const Run both = run({"eval-mmd", "--x", f.string(), "--xhat", f.string(), "--y", f.string(),
                        "--out", (dir / "both.json").string(), "--estimator", "both"});
  REQUIRE(both.code == kExitOk);
  CHECK(read_json(dir / "both.json")["results"].size() == 6);

  CHECK(run({"eval-mmd", "--x", f.string(), "--xhat", f.string(), "--y", f.string(), "--out",
             (dir / "bad.json").string(), "--estimator", "cubic"})
            .code == kExitUsage);

  const Run t = run({"eval-tsne", "--x", f.string(), "--xhat", f.string(), "--y", f.string(),
                     "--csv", (dir / "e.csv").string(), "--summary", (dir / "s.json").string(),
                     "--perplexity", "10", "--iterations", "50"});
  REQUIRE(t.code == kExitOk);
  const auto csv = lines(dir / "e.csv");
  REQUIRE(csv.size() == 121);
  CHECK(csv[0] == "index,label,y1,y2");
  CHECK(csv[1].rfind("0,X,", 0) == 0);
  CHECK(csv[41].rfind("40,Xhat,", 0) == 0);
  CHECK(csv[120].rfind("119,Ytilde,", 0) == 0);
  const json s = read_json(dir / "s.json");
  CHECK(s["iterations"] == 50);
  CHECK(s["set_means"].contains("X"));
  CHECK(s["set_means"].contains("Xhat"));
  CHECK(s["set_means"]["Ytilde"].size() == 2);
  CHECK(s["kl_final"].get<double>() >= 0.0);
}

TEST_CASE("exit codes") {
  TempDir dir("cli");
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"gen-toy"}).code == kExitUsage);  // missing --out
  CHECK(run({"gen-toy", "--out", dir.path().string(), "--size", "abc"}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);

  CHECK(run({"features", "--images", (dir / "nope").string(), "--out",
             (dir / "f.srft").string()})
            .code == kExitInput);
  CHECK(run({"eval-mmd", "--x", (dir / "nope.srft").string(), "--xhat", "a", "--y", "b",
             "--out", (dir / "m.json").string()})
            .code == kExitInput);
  std::ofstream(dir / "junk.srft") << "XXXXjunk";
  CHECK(run({"eval-mmd", "--x", (dir / "junk.srft").string(), "--xhat",
             (dir / "junk.srft").string(), "--y", (dir / "junk.srft").string(), "--out",
             (dir / "m.json").string()})
            .code == kExitInput);

  const fs::path toy = make_toy(dir);
  const Run r = run({"train", "--synthetic", (toy / "source").string(), "--real",
                     (toy / "target").string(), "--out", (dir / "d.ckpt").string(), "--steps",
                     "20", "--optimizer", "sgd", "--lr", "1e300", "--width", "4", "--blocks",
                     "1"});
  CHECK(r.code == kExitNumeric);
  CHECK(r.err.find("diverged") != std::string::npos);
}

TEST_CASE("config files fill in options the command line leaves out") {
  TempDir dir("cli");
  const fs::path toy = make_toy(dir);
  std::ofstream(dir / "train.cfg") << "# toy run\n"
                                   << "steps = 4\n"
                                   << "seed=9\n"
                                   << "width = 4\n"
                                   << "blocks = 1\n"
                                   << "l1-sum = true\n";
  const Run r = run({"train", "--config", (dir / "train.cfg").string(), "--synthetic",
                     (toy / "source").string(), "--real", (toy / "target").string(), "--out",
                     (dir / "a.ckpt").string(), "--steps", "2"});
  REQUIRE(r.code == kExitOk);
  CHECK(lines(dir / "a.ckpt.losses.ndjson").size() == 2);  // flag wins

  const Run same = run({"train", "--synthetic", (toy / "source").string(), "--real",
                        (toy / "target").string(), "--out", (dir / "b.ckpt").string(),
                        "--steps", "2", "--seed", "9", "--width", "4", "--blocks", "1",
                        "--l1-sum"});
  REQUIRE(same.code == kExitOk);
  CHECK(testing::slurp(dir / "a.ckpt") == testing::slurp(dir / "b.ckpt"));

  CHECK(run({"train", "--config", (dir / "missing.cfg").string()}).code == kExitInput);
}
