#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "satrefine/errors.hpp"
#include "satrefine/nets.hpp"
#include "support.hpp"

using namespace satrefine;
using ad::Shape;
using ad::Tensor;

namespace {

Tensor random_batch(std::uint64_t seed, Shape shape) {
  Rng rng = derive_rng(seed, 0);
  return testing::random_tensor(rng, std::move(shape), 0.0, 1.0);
}

double hand_sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TEST_CASE("refiner with a zero trunk is the identity") {
  const RefinerNet zero;
  const Tensor x = random_batch(1, {2, 3, 8, 8});
  CHECK(zero.forward(x) == x);

  // Freshly initialised: the exit conv starts at zero, so still the identity.
  const RefinerNet init = RefinerNet::initialize({}, 3);
  CHECK(init.forward(x) == x);
}

TEST_CASE("refiner outputs stay in [0,1] and keep the shape") {
  RefinerNet net = RefinerNet::initialize({}, 4);
  Rng rng = derive_rng(4, 1);
  for (ConvLayer& l : net.layers())  // perturb everything, exit included
    for (double& w : l.weight.data()) w = uniform(rng, -1.0, 1.0);
  const Tensor x = random_batch(5, {3, 3, 9, 7});
  const Tensor y = net.forward(x);
  CHECK(y.shape() == x.shape());
  for (double v : y.data()) CHECK((v >= 0.0 && v <= 1.0));
  CHECK(y != x);
}

TEST_CASE("refiner forward is bit-reproducible for a fixed seed") {
  const Tensor x = random_batch(6, {1, 3, 8, 8});
  auto run = [&] {
    RefinerNet net = RefinerNet::initialize({}, 9);
    Rng rng = derive_rng(9, 7);
    for (double& w : net.layers().back().weight.data()) w = uniform(rng, -0.2, 0.2);
    return net.forward(x);
  };
  CHECK(run() == run());
}

TEST_CASE("initialisation ranges") {
  const RefinerNet r = RefinerNet::initialize({}, 10);
  const auto& layers = r.layers();
  REQUIRE(layers.size() == 2 + 2 * 2);
  CHECK(layers.front().name == "entry");
  CHECK(layers.back().name == "exit");
  for (const ConvLayer& l : layers) {
    const double fan_in = static_cast<double>(l.weight.dim(1) * l.weight.dim(2) * l.weight.dim(3));
    const double bound = 1.0 / std::sqrt(fan_in);
    for (double w : l.weight.data()) {
      CHECK(std::abs(w) <= bound);
      CHECK(static_cast<double>(static_cast<float>(w)) == w);
    }
    if (l.name == "exit") {
      for (double w : l.weight.data()) CHECK(w == 0.0);
      for (double b : l.bias.data()) CHECK(b == 0.0);
    }
  }
  CHECK(RefinerNet::initialize({}, 10).named_parameters().size() == 12);
  CHECK(RefinerNet::initialize({}, 11).layers()[0].weight != layers[0].weight);
}

TEST_CASE("channel mismatch is a shape error") {
  const RefinerNet r;
  const DiscriminatorNet d;
  CHECK_THROWS_AS(r.forward(Tensor({1, 1, 8, 8})), ShapeError);
  CHECK_THROWS_AS(d.forward(Tensor({1, 1, 8, 8})), ShapeError);
  CHECK_THROWS_AS(r.forward(Tensor({3, 8, 8})), ShapeError);
}

TEST_CASE("discriminator probability") {
  SUBCASE("zero logit layer gives one half") {
    DiscriminatorNet d = DiscriminatorNet::initialize({}, 12);
    ConvLayer& last = d.layers().back();
    std::fill(last.weight.data().begin(), last.weight.data().end(), 0.0);
    std::fill(last.bias.data().begin(), last.bias.data().end(), 0.0);
    const Tensor p = d.forward(random_batch(13, {2, 3, 16, 16}));
    CHECK(p == Tensor({2}, 0.5));
  }
  SUBCASE("strictly inside (0,1)") {
    DiscriminatorNet d = DiscriminatorNet::initialize({}, 14);
    for (double& b : d.layers().back().bias.data()) b = 50.0;
    for (double v : d.forward(random_batch(15, {2, 3, 16, 16})).data())
      CHECK((v > 0.0 && v <= 1.0));
    for (double& b : d.layers().back().bias.data()) b = -50.0;
    for (double v : d.forward(random_batch(15, {2, 3, 16, 16})).data())
      CHECK((v > 0.0 && v < 1.0));
    const Tensor plain = DiscriminatorNet::initialize({}, 14).forward(random_batch(16, {3, 3, 32, 32}));
    CHECK(plain.shape() == Shape{3});
    for (double v : plain.data()) CHECK((v > 0.0 && v < 1.0));
  }
  SUBCASE("hand-built single conv on a 2x2 image") {
    DiscriminatorConfig cfg;
    cfg.channels = 1;
    cfg.layers = 1;
    DiscriminatorNet d(cfg);
    ConvLayer& l = d.layers().at(0);
    REQUIRE(l.weight.shape() == Shape{1, 1, 3, 3});
    // Kernel k[r][c] = r*3 + c + 1, bias 0.5, padding 1.
    for (std::size_t i = 0; i < 9; ++i) l.weight[i] = static_cast<double>(i + 1) / 10.0;
    l.bias[0] = 0.5;
    const Tensor img({1, 1, 2, 2}, {0.1, 0.2, 0.3, 0.4});
    // Cross-correlation by hand for each output position (y, x).
    const double a = 0.1, b = 0.2, c = 0.3, e = 0.4;
    const double k[3][3] = {{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}, {0.7, 0.8, 0.9}};
    const double o00 = k[1][1] * a + k[1][2] * b + k[2][1] * c + k[2][2] * e + 0.5;
    const double o01 = k[1][0] * a + k[1][1] * b + k[2][0] * c + k[2][1] * e + 0.5;
    const double o10 = k[0][1] * a + k[0][2] * b + k[1][1] * c + k[1][2] * e + 0.5;
    const double o11 = k[0][0] * a + k[0][1] * b + k[1][0] * c + k[1][1] * e + 0.5;
    const double want = hand_sigmoid((o00 + o01 + o10 + o11) / 4.0);
    CHECK(d.forward(img).item() == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("checkpoint golden bytes for one tensor") {
  const NamedTensor t{"w", Tensor({2, 3}, {1, 2, 3, 4, 5, 6})};
  const auto bytes = encode_checkpoint(std::span(&t, 1));
  REQUIRE(bytes.size() == 53);
  const std::vector<std::uint8_t> golden = {
      'S', 'R', 'C', 'K',  1, 0, 0, 0,  1, 0, 0, 0,     // magic, version, count
      1, 0, 0, 0,  'w',                                 // name
      2, 0, 0, 0,  2, 0, 0, 0,  3, 0, 0, 0,             // ndim, dims
      0x00, 0x00, 0x80, 0x3f,  0x00, 0x00, 0x00, 0x40,  // 1.0f, 2.0f
      0x00, 0x00, 0x40, 0x40,  0x00, 0x00, 0x80, 0x40,  // 3.0f, 4.0f
      0x00, 0x00, 0xa0, 0x40,  0x00, 0x00, 0xc0, 0x40,  // 5.0f, 6.0f
  };
  CHECK(bytes == golden);
  CHECK(testing::slurp(SATREFINE_GOLDEN_DIR "/srck_1tensor.bin") == golden);
  const auto back = decode_checkpoint(bytes);
  REQUIRE(back.size() == 1);
  CHECK(back[0].name == "w");
  CHECK(back[0].tensor == t.tensor);
}

TEST_CASE("checkpoint errors are distinct") {
  const NamedTensor t{"w", Tensor({2, 3}, 0.5)};
  const auto good = encode_checkpoint(std::span(&t, 1));
  auto kind_of = [](std::vector<std::uint8_t> b) {
    try {
      decode_checkpoint(b);
    } catch (const CheckpointError& e) {
      return e.kind();
    }
    FAIL("decode did not throw");
    return CheckpointError::Kind::corrupt;
  };
  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(kind_of(bad_magic) == CheckpointError::Kind::bad_magic);
  auto bad_version = good;
  bad_version[4] = 2;
  CHECK(kind_of(bad_version) == CheckpointError::Kind::bad_version);
  for (std::size_t cut : {std::size_t{10}, std::size_t{20}, good.size() - 1})
    CHECK(kind_of({good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut)}) ==
          CheckpointError::Kind::corrupt);
  auto trailing = good;
  trailing.push_back(0);
  CHECK(kind_of(trailing) == CheckpointError::Kind::corrupt);
  const NamedTensor twice[] = {t, t};
  CHECK(kind_of(encode_checkpoint(twice)) == CheckpointError::Kind::corrupt);
}

TEST_CASE("nets and optimizer state round-trip through a checkpoint file") {
  testing::TempDir dir("ckpt");
  const RefinerNet r = RefinerNet::initialize({}, 20);
  const DiscriminatorNet d = DiscriminatorNet::initialize({}, 21);

  SUBCASE("nets only") {
    save_checkpoint(dir / "a.srck", r, d);
    const ModelCheckpoint back = load_checkpoint(dir / "a.srck", {}, {});
    CHECK(back.refiner.named_parameters().size() == r.named_parameters().size());
    for (std::size_t i = 0; i < r.layers().size(); ++i) {
      CHECK(back.refiner.layers()[i].weight == r.layers()[i].weight);
      CHECK(back.refiner.layers()[i].bias == r.layers()[i].bias);
    }
    for (std::size_t i = 0; i < d.layers().size(); ++i)
      CHECK(back.discriminator.layers()[i].weight == d.layers()[i].weight);
    CHECK_FALSE(back.refiner_optimizer.has_value());
  }
  SUBCASE("with optimizer moments") {
    RefinerNet rr = r;
    ad::Optimizer opt;
    std::vector<Tensor> grads;
    for (Tensor* p : rr.parameters()) grads.push_back(Tensor(p->shape(), 0.01));
    opt.step(rr.parameters(), grads);
    opt.step(rr.parameters(), grads);
    save_checkpoint(dir / "b.srck", rr, d, &opt, nullptr);
    const ModelCheckpoint back = load_checkpoint(dir / "b.srck", {}, {});
    REQUIRE(back.refiner_optimizer.has_value());
    CHECK(back.refiner_optimizer->step_count == 2);
    CHECK(back.refiner_optimizer->first == opt.first_moments());
    CHECK(back.refiner_optimizer->second == opt.second_moments());
    CHECK(back.refiner.layers()[0].weight == rr.layers()[0].weight);

    // A second save of the loaded state is byte-identical.
    ad::Optimizer restored;
    restored.restore(back.refiner_optimizer->step_count, back.refiner_optimizer->first,
                     back.refiner_optimizer->second);
    save_checkpoint(dir / "c.srck", back.refiner, back.discriminator, &restored, nullptr);
    CHECK(testing::slurp(dir / "b.srck") == testing::slurp(dir / "c.srck"));
  }
  SUBCASE("architecture mismatch") {
    save_checkpoint(dir / "a.srck", r, d);
    RefinerConfig wide;
    wide.width = 8;
    try {
      load_checkpoint(dir / "a.srck", wide, {});
      FAIL("expected shape mismatch");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::shape_mismatch);
    }
    RefinerConfig deeper;
    deeper.blocks = 3;
    CHECK_THROWS_AS(load_checkpoint(dir / "a.srck", deeper, {}), CheckpointError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(dir / "nope.srck", {}, {}), IoError);
  }
}

TEST_CASE("batch packing") {
  const ImagePatch p(2, 1, 3, std::vector<float>{0.1f, 0.2f, 0.3f, 0.4f, 0.5f, 0.6f});
  const Tensor t = to_batch(p);
  CHECK(t.shape() == Shape{1, 3, 1, 2});
  CHECK(t[0] == static_cast<double>(0.1f));  // channel 0, x 0
  CHECK(t[1] == static_cast<double>(0.4f));  // channel 0, x 1
  CHECK(t[2] == static_cast<double>(0.2f));  // channel 1, x 0
  CHECK(from_batch(t).at(0) == p);
  const ImagePatch q(2, 2, 3);
  const ImagePatch both[] = {p, q};
  CHECK_THROWS_AS(to_batch(both), ShapeError);
}
