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

ConformerConfig small_config() {
  ConformerConfig cfg;
  cfg.num_blocks = 2;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.conv_kernel = 3;
  cfg.ffn_expansion = 2;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  ConformerConfig cfg = small_config();
  cfg.heads = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.conv_kernel = 4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("block with zeroed sub-block outputs reduces to its final norm") {
  ConformerConfig cfg = small_config();
  Rng rng(5);
  BlockParams p = make_block(cfg, rng);
  auto zero_linear = [](LinearParams& l) {
    l.weight.flat().setZero();
    l.bias.flat().setZero();
  };
  zero_linear(p.ffn1.outer);
  zero_linear(p.ffn2.outer);
  zero_linear(p.mhsa.output);
  zero_linear(p.conv.pointwise_out);

  Tensor x = random_tensor({4, cfg.d_model}, rng);
  Tape t;
  Tensor got = block_forward(p, t.constant(x)).value();
  Tape t2;
  Tensor want = layernorm_forward(p.final_norm, t2.constant(x)).value();
  for (Index i = 0; i < got.size(); ++i) CHECK(got(i) == want(i));
}

TEST_CASE("hooks at identity init match the hook-free block") {
  ConformerConfig cfg = small_config();
  Rng rng(7);
  BlockParams p = make_block(cfg, rng);
  AdapterSet set = build_adapter_set({Placement::Tpa, 4, false, BiasInit::Xavier}, cfg, 9);
  for (auto& [site, a] : set.entries) a.up.bias.flat().setZero();

  Tensor x = random_tensor({5, cfg.d_model}, rng);
  Tape t;
  Tensor plain = block_forward(p, t.constant(x)).value();
  Tape t2;
  Tensor hooked = block_forward(p, t2.constant(x), hooks_for_block(set, 0)).value();
  CHECK((plain.flat() - hooked.flat()).abs().maxCoeff() <= 1e-9);
}

TEST_CASE("encoder composition") {
  ConformerConfig cfg = small_config();
  auto blocks = make_encoder(cfg);
  Rng rng(11);
  Tensor x = random_tensor({5, cfg.d_model}, rng);

  SUBCASE("zero blocks is the identity") {
    std::vector<BlockParams> none;
    Tape t;
    Var in = t.constant(x);
    Var out = encoder_forward(none, in);
    CHECK(out.id() == in.id());
  }

  SUBCASE("one block equals block_forward") {
    std::vector<BlockParams> one;
    one.push_back(make_block(cfg, rng));
    Tape t;
    Tensor enc = encoder_forward(one, t.constant(x)).value();
    Tape t2;
    Tensor blk = block_forward(one[0], t2.constant(x)).value();
    for (Index i = 0; i < enc.size(); ++i) CHECK(enc(i) == blk(i));
  }

  SUBCASE("two blocks equal the manual composition") {
    Tape t;
    Tensor enc = encoder_forward(blocks, t.constant(x)).value();
    Tape t2;
    Tensor stage = block_forward(blocks[0], t2.constant(x), {}, 0).value();
    Tape t3;
    Tensor manual = block_forward(blocks[1], t3.constant(stage), {}, 1).value();
    for (Index i = 0; i < enc.size(); ++i) CHECK(enc(i) == manual(i));
  }

  SUBCASE("output shape equals input shape") {
    Tape t;
    Var out = encoder_forward(blocks, t.constant(x));
    CHECK(out.shape() == x.shape());
  }
}

TEST_CASE("serial adapter on the last block shifts the output by exactly b2") {
  ConformerConfig cfg = small_config();
  auto blocks = make_encoder(cfg);
  AdapterSpec spec{Placement::Serial, 4, false, BiasInit::Xavier};
  AdapterSet set;
  set.spec = spec;
  Rng arng(13);
  set.entries.emplace(InsertionSite{cfg.num_blocks - 1, Site::AfterBlock},
                      make_adapter(cfg.d_model, spec, arng));
  const Tensor& b2 = set.entries.begin()->second.up.bias;

  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x = random_tensor({4, cfg.d_model}, rng);
    Tape t;
    Tensor base = encoder_forward(blocks, t.constant(x)).value();
    Tape t2;
    Tensor adapted = encoder_forward(blocks, t2.constant(x), &set).value();
    // adapted == base + b2, composed by the same rowwise add
    Tape t3;
    Tensor want = add_rowwise(t3.constant(base), t3.constant(b2)).value();
    for (Index i = 0; i < adapted.size(); ++i) CHECK(adapted(i) == want(i));
  }
}

TEST_CASE("adapters are block-local: mutating one leaves other blocks unchanged") {
  ConformerConfig cfg = small_config();
  auto blocks = make_encoder(cfg);
  AdapterSet set = build_adapter_set({Placement::Tpa, 4, false, BiasInit::Xavier}, cfg, 19);
  Rng rng(23);
  Tensor x = random_tensor({4, cfg.d_model}, rng);

  Tape t;
  Tensor block1_before = block_forward(blocks[1], t.constant(x), hooks_for_block(set, 1), 1).value();

  // scribble over block 0's adapters
  for (auto& [site, a] : set.entries) {
    if (site.block_index == 0) {
      a.up.weight = random_tensor({a.width(), a.dim()}, rng);
      a.up.bias = random_tensor({a.dim()}, rng);
    }
  }
  Tape t2;
  Tensor block1_after = block_forward(blocks[1], t2.constant(x), hooks_for_block(set, 1), 1).value();
  for (Index i = 0; i < block1_before.size(); ++i) CHECK(block1_before(i) == block1_after(i));
}

TEST_CASE("full encoder with TPA adapters passes the gradient check") {
  ConformerConfig cfg = small_config();
  cfg.num_blocks = 1;  // one block keeps the finite-difference sweep quick
  auto blocks = make_encoder(cfg);
  AdapterSet set = build_adapter_set({Placement::Tpa, 2, false, BiasInit::Xavier}, cfg, 29);
  Rng rng(31);
  Tensor x = random_tensor({4, cfg.d_model}, rng);
  Tensor w = random_tensor({4, cfg.d_model}, rng);

  NamedParams params;
  visit_params(blocks, "encoder", [&](const std::string& n, Tensor& t) { params.emplace_back(n, &t); });
  visit_params(set, "adapter", [&](const std::string& n, Tensor& t) { params.emplace_back(n, &t); });

  auto f = [&](Tape& t) { return sum_all(mul(encoder_forward(blocks, t.constant(x), &set), t.constant(w))); };
  auto report = grad_check(f, params, 1e-5, 1e-4);
  CHECK(report.passed());
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("encoder parameter count matches enumeration") {
  ConformerConfig cfg = small_config();
  auto blocks = make_encoder(cfg);
  long long n = 0;
  visit_params(blocks, "encoder", [&](const std::string&, Tensor& t) { n += t.size(); });
  CHECK(n == encoder_param_count(cfg));

  ConformerConfig desk;  // default 4x32 config
  auto desk_blocks = make_encoder(desk);
  n = 0;
  visit_params(desk_blocks, "encoder", [&](const std::string&, Tensor& t) { n += t.size(); });
  CHECK(n == encoder_param_count(desk));
}
