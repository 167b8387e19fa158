#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tpa/conformer.hpp"
#include "tpa/gradcheck.hpp"

using namespace tpa;

namespace {

Tensor random_tensor(std::vector<Index> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t(i) = rng.uniform(lo, hi);
  return t;
}

// Independent oracle: count parameters by walking the actual tensors.
long long enumerate_params(AdapterSet& set) {
  long long n = 0;
  visit_params(set, "a", [&n](const std::string&, Tensor& t) { n += t.size(); });
  return n;
}

void force_b2_zero(AdapterSet& set) {
  for (auto& [site, p] : set.entries) p.up.bias.flat().setZero();
}

}  // namespace

TEST_CASE("adapter with zero up projection is the identity") {
  Rng rng(1);
  AdapterSpec spec{Placement::Serial, 4, false, BiasInit::Zero};
  AdapterParams p = make_adapter(6, spec, rng);
  Tensor x = random_tensor({3, 6}, rng);
  Tape t;
  Tensor out = adapter_forward(p, t.constant(x)).value();
  for (Index i = 0; i < x.size(); ++i) CHECK(out(i) == x(i));
}

TEST_CASE("adapter computes x + relu(x) under identity wiring") {
  AdapterParams p;
  p.down = LinearParams{Tensor({2, 2}), Tensor({2})};
  p.up = LinearParams{Tensor({2, 2}), Tensor({2})};
  p.down.weight(0, 0) = p.down.weight(1, 1) = 1.0;
  p.up.weight(0, 0) = p.up.weight(1, 1) = 1.0;
  Tape t;
  Tensor out = adapter_forward(p, t.constant(Tensor::matrix({{1, -1}}))).value();
  CHECK(out(0) == 2.0);
  CHECK(out(1) == -1.0);
}

TEST_CASE("paper init turns the adapter branch into the constant b2") {
  Rng rng(3);
  AdapterSpec spec{Placement::Serial, 5, false, BiasInit::Xavier};
  AdapterParams p = make_adapter(4, spec, rng);
  CHECK(p.up.weight.flat().abs().maxCoeff() == 0.0);  // W2 all-zero at init
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor({3, 4}, rng, -5.0, 5.0);
    Tape t;
    Tensor got = adapter_forward(p, t.constant(x)).value();
    // expected = x + b2, composed by the same rowwise add
    Tape t2;
    Tensor want = add_rowwise(t2.constant(x), t2.constant(p.up.bias)).value();
    for (Index i = 0; i < got.size(); ++i) CHECK(got(i) == want(i));
  }
}

TEST_CASE("adapter width mismatch raises a dimension error") {
  Rng rng(5);
  AdapterParams p = make_adapter(4, AdapterSpec{Placement::Serial, 2, false, BiasInit::Zero}, rng);
  Tape t;
  CHECK_THROWS_AS(adapter_forward(p, t.constant(Tensor({3, 6}))), DimensionError);
}

TEST_CASE("layer-norm toggle changes structure, not just values") {
  Rng rng(7);
  AdapterSet with_ln = build_adapter_set({Placement::Tpa, 4, true, BiasInit::Xavier}, 2, 8, 11);
  AdapterSet without_ln = build_adapter_set({Placement::Tpa, 4, false, BiasInit::Xavier}, 2, 8, 11);
  long long ln_names = 0, plain_names = 0;
  visit_params(with_ln, "a", [&](const std::string& n, Tensor&) { ln_names += n.find("/norm/") != std::string::npos; });
  visit_params(without_ln, "a", [&](const std::string& n, Tensor&) { plain_names += n.find("/norm/") != std::string::npos; });
  CHECK(ln_names == 8);  // gamma+beta per adapter, 2 blocks x 2 sites
  CHECK(plain_names == 0);
  for (auto& [site, p] : without_ln.entries) CHECK_FALSE(p.norm.has_value());
  (void)rng;
}

TEST_CASE("apply_serial") {
  Rng rng(9);
  const Index d = 6;

  SUBCASE("identity-init adapter leaves the block output unchanged") {
    AdapterParams p = make_adapter(d, {Placement::Serial, 3, false, BiasInit::Xavier}, rng);
    p.up.bias.flat().setZero();
    Tensor x = random_tensor({4, d}, rng);
    Tape t;
    Tensor out = apply_serial(t.constant(x), p).value();
    for (Index i = 0; i < x.size(); ++i) CHECK(out(i) == x(i));
  }

  SUBCASE("composition over two stages equals manual blockwise application") {
    AdapterParams p1 = make_adapter(d, {Placement::Serial, 3, false, BiasInit::Xavier}, rng);
    AdapterParams p2 = make_adapter(d, {Placement::Serial, 3, false, BiasInit::Xavier}, rng);
    p1.up.weight = random_tensor({3, d}, rng);
    p2.up.weight = random_tensor({3, d}, rng);
    Tensor x = random_tensor({4, d}, rng);

    Tape t;
    Tensor composed = apply_serial(apply_serial(t.constant(x), p1), p2).value();
    Tape t2;
    Tensor stage1 = apply_serial(t2.constant(x), p1).value();
    Tape t3;
    Tensor stage2 = apply_serial(t3.constant(stage1), p2).value();
    for (Index i = 0; i < composed.size(); ++i) CHECK(composed(i) == stage2(i));
  }

  SUBCASE("gradient check through the serial path") {
    AdapterParams p = make_adapter(d, {Placement::Serial, 3, false, BiasInit::Xavier}, rng);
    p.up.weight = random_tensor({3, d}, rng);
    Tensor x = random_tensor({4, d}, rng);
    Tensor w = random_tensor({4, d}, rng);
    auto f = [&](Tape& t) { return sum_all(mul(apply_serial(t.leaf(x), p), t.constant(w))); };
    NamedParams params{{"x", &x}};
    visit_params(p, "adapter", [&](const std::string& n, Tensor& t) { params.emplace_back(n, &t); });
    CHECK(grad_check(f, params, 1e-5, 1e-4).passed());
  }
}

TEST_CASE("apply_parallel") {
  Rng rng(11);
  const Index d = 2;

  SUBCASE("identity-init adapter reduces to the unadapted site") {
    AdapterParams p = make_adapter(d, {Placement::ParallelFfn1, 2, false, BiasInit::Xavier}, rng);
    p.up.bias.flat().setZero();
    Tensor x = random_tensor({3, d}, rng);
    Tensor fw = random_tensor({d, d}, rng);
    auto f = [&](Var in) { return matmul(in, in.tape().constant(fw)); };
    Tape t;
    Tensor adapted = apply_parallel(t.constant(x), 0.5, f, p).value();
    Tape t2;
    Var x2 = t2.constant(x);
    Tensor plain = add(x2, scale(f(x2), 0.5)).value();
    for (Index i = 0; i < adapted.size(); ++i) CHECK(adapted(i) == plain(i));
  }

  SUBCASE("zero main branch reduces to adapter_forward") {
    AdapterParams p;
    p.down = LinearParams{Tensor({2, 2}), Tensor({2})};
    p.up = LinearParams{Tensor({2, 2}), Tensor({2})};
    p.down.weight(0, 0) = p.down.weight(1, 1) = 1.0;
    p.up.weight(0, 0) = p.up.weight(1, 1) = 1.0;
    auto zero_f = [](Var in) { return scale(in, 0.0); };
    Tape t;
    Tensor out = apply_parallel(t.constant(Tensor::matrix({{1, -1}})), 0.5, zero_f, p).value();
    CHECK(out(0) == 2.0);
    CHECK(out(1) == -1.0);
  }

  SUBCASE("path decomposition identity") {
    // apply_parallel(x,c,F,p) - apply_parallel(x,c,F,zero) == adapter(p,x) - x
    AdapterParams p = make_adapter(d, {Placement::ParallelFfn1, 2, false, BiasInit::Xavier}, rng);
    p.up.weight = random_tensor({2, d}, rng);
    AdapterParams zero;
    zero.down = LinearParams{Tensor({d, 2}), Tensor({2})};
    zero.up = LinearParams{Tensor({2, d}), Tensor({d})};
    Tensor x = random_tensor({3, d}, rng);
    Tensor fw = random_tensor({d, d}, rng);
    auto f = [&](Var in) { return matmul(in, in.tape().constant(fw)); };

    Tape t;
    Tensor with_p = apply_parallel(t.constant(x), 0.5, f, p).value();
    Tape t2;
    Tensor with_zero = apply_parallel(t2.constant(x), 0.5, f, zero).value();
    Tape t3;
    Var x3 = t3.constant(x);
    Tensor branch = sub(adapter_forward(p, x3), x3).value();
    for (Index i = 0; i < x.size(); ++i) {
      CHECK(std::abs((with_p(i) - with_zero(i)) - branch(i)) <= 1e-12);
    }
  }

  SUBCASE("gradient check with random main branch and adapter") {
    AdapterParams p = make_adapter(d, {Placement::ParallelFfn1, 2, false, BiasInit::Xavier}, rng);
    p.up.weight = random_tensor({2, d}, rng);
    Tensor x = random_tensor({3, d}, rng);
    Tensor fw = random_tensor({d, d}, rng);
    Tensor w = random_tensor({3, d}, rng);
    auto f = [&](Tape& t) {
      auto branch = [&](Var in) { return swish(matmul(in, in.tape().constant(fw))); };
      return sum_all(mul(apply_parallel(t.leaf(x), 0.5, branch, p), t.constant(w)));
    };
    NamedParams params{{"x", &x}};
    visit_params(p, "adapter", [&](const std::string& n, Tensor& t) { params.emplace_back(n, &t); });
    CHECK(grad_check(f, params, 1e-5, 1e-4).passed());
  }
}

TEST_CASE("build_adapter_set placement rules") {
  AdapterSet serial = build_adapter_set({Placement::Serial, 4, false, BiasInit::Xavier}, 4, 8, 5);
  CHECK(serial.entries.size() == 4);
  for (auto& [site, p] : serial.entries) CHECK(site.site == Site::AfterBlock);

  AdapterSet tpa = build_adapter_set({Placement::Tpa, 4, false, BiasInit::Xavier}, 4, 8, 5);
  CHECK(tpa.entries.size() == 8);
  for (int b = 0; b < 4; ++b) {
    CHECK(tpa.find({b, Site::Ffn1}) != nullptr);
    CHECK(tpa.find({b, Site::Ffn2}) != nullptr);
    CHECK(tpa.find({b, Site::AfterBlock}) == nullptr);
  }

  AdapterSet conv = build_adapter_set({Placement::ParallelConv, 4, false, BiasInit::Xavier}, 3, 8, 5);
  CHECK(conv.entries.size() == 3);
  for (auto& [site, p] : conv.entries) CHECK(site.site == Site::Conv);
}

TEST_CASE("build_adapter_set is deterministic under the seed") {
  AdapterSpec spec{Placement::Tpa, 4, true, BiasInit::Xavier};
  AdapterSet a = build_adapter_set(spec, 3, 8, 42);
  AdapterSet b = build_adapter_set(spec, 3, 8, 42);
  AdapterSet c = build_adapter_set(spec, 3, 8, 43);

  std::vector<double> va, vb, vc;
  visit_params(a, "a", [&](const std::string&, Tensor& t) { for (Index i = 0; i < t.size(); ++i) va.push_back(t(i)); });
  visit_params(b, "a", [&](const std::string&, Tensor& t) { for (Index i = 0; i < t.size(); ++i) vb.push_back(t(i)); });
  visit_params(c, "a", [&](const std::string&, Tensor& t) { for (Index i = 0; i < t.size(); ++i) vc.push_back(t(i)); });
  CHECK(va == vb);
  CHECK(va != vc);
}

TEST_CASE("count_adapter_params closed form") {
  SUBCASE("hand-checked values") {
    CHECK(count_adapter_params({Placement::Serial, 2, false, BiasInit::Xavier}, 1, 4).per_adapter == 22);
    CHECK(count_adapter_params({Placement::Serial, 1, false, BiasInit::Xavier}, 1, 1).per_adapter == 4);
    CHECK_THROWS_AS(build_adapter_set({Placement::Serial, 0, false, BiasInit::Xavier}, 1, 4, 1),
                    ConfigError);
  }

  SUBCASE("serial at 2w vs TPA at w differ by exactly d per block") {
    for (Index d : {4, 8, 32}) {
      for (Index w : {1, 2, 8}) {
        auto serial = count_adapter_params({Placement::Serial, 2 * w, false, BiasInit::Xavier}, 1, d);
        auto tpa = count_adapter_params({Placement::Tpa, w, false, BiasInit::Xavier}, 1, d);
        CHECK(tpa.total - serial.total == d);
      }
    }
  }

  SUBCASE("matches tensor enumeration over the full grid") {
    for (Index d : {2, 4, 8, 32}) {
      for (Index w : {1, 2, 16}) {
        for (Placement pl : {Placement::Serial, Placement::ParallelFfn1, Placement::Tpa, Placement::ParallelConv}) {
          for (bool ln : {false, true}) {
            AdapterSpec spec{pl, w, ln, BiasInit::Xavier};
            AdapterSet set = build_adapter_set(spec, 3, d, 7);
            CHECK(count_adapter_params(spec, 3, d).total == enumerate_params(set));
          }
        }
      }
    }
  }
}

TEST_CASE("fully pruned adapter applies only the b2 offset") {
  AdapterParams p;
  p.down = LinearParams{Tensor({3, 0}), Tensor({0})};
  p.up = LinearParams{Tensor({0, 3}), Tensor({3})};
  p.up.bias = Tensor::row({1, 2, 3});
  Tape t;
  Tensor out = adapter_forward(p, t.constant(Tensor::matrix({{10, 10, 10}}))).value();
  CHECK(out(0) == 11.0);
  CHECK(out(1) == 12.0);
  CHECK(out(2) == 13.0);
}

TEST_CASE("identity at init holds through a full encoder for every placement") {
  ConformerConfig cfg;
  cfg.num_blocks = 2;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.conv_kernel = 3;
  cfg.ffn_expansion = 2;
  cfg.seed = 21;
  auto blocks = make_encoder(cfg);
  Rng rng(23);
  Tensor x = random_tensor({5, cfg.d_model}, rng);

  Tape base_tape;
  Tensor base = encoder_forward(blocks, base_tape.constant(x)).value();

  for (Placement pl : {Placement::Serial, Placement::ParallelFfn1, Placement::Tpa, Placement::ParallelConv}) {
    AdapterSet set = build_adapter_set({pl, 4, false, BiasInit::Xavier}, cfg, 31);
    force_b2_zero(set);
    Tape t;
    Tensor adapted = encoder_forward(blocks, t.constant(x), &set).value();
    double max_diff = (adapted.flat() - base.flat()).abs().maxCoeff();
    INFO(to_string(pl));
    CHECK(max_diff <= 1e-12);
  }
}
