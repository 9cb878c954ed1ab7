// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "chemix/model.hpp"

using namespace chemix;

namespace {

const Tensor* bind(const Tensor& t) { return &t; }

const Family kAllFamilies[] = {Family::FC,       Family::CNN,      Family::RNN,
                               Family::CNN_RNN,  Family::CNN_x_FC, Family::RNN_x_FC,
                               Family::CNN_RNN_x_FC};

Tensor random_indices(Index batch, Index len, Index vocab, SplitMix64& rng) {
  Tensor t({batch, len});
  for (Index i = 0; i < t.size(); ++i)
    t[i] = static_cast<Scalar>(rng.next_below(static_cast<std::uint64_t>(vocab) + 1));
  return t;
}

Tensor random_bits(Index batch, SplitMix64& rng) {
  Tensor t({batch, kFingerprintWidth});
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(rng.next_below(2));
  return t;
}

}  // namespace

TEST_CASE("CNN_x_FC wiring for the CEP dimensions") {
  ArchitectureSpec spec;
  spec.family = Family::CNN_x_FC;
  spec.task = Task::Regression;
  const ModelInstance model = build_model(spec, 23, 83, 1);
  const BuiltGraph bg = model.build_forward(4);

  // flattened sequence branch: (batch, 83*32); concat width 83*32 + 64
  bool found_flatten = false, found_concat = false, found_head = false;
  for (const Node& n : bg.graph->nodes()) {
    if (n.kind == OpKind::Reshape && n.shape == Shape{4, 83 * 32}) found_flatten = true;
    if (n.kind == OpKind::ConcatLast && n.shape == Shape{4, 83 * 32 + 64}) found_concat = true;
    if (n.kind == OpKind::MatMul && n.shape == Shape{4, 64}) found_head = true;
  }
  CHECK(found_flatten);
  CHECK(found_concat);
  CHECK(found_head);
  CHECK(bg.graph->node(bg.output.id).shape == Shape{4, 1});

  SUBCASE("embedding table is (vocab+1) x 32") {
    CHECK(model.params.at("embed.table").shape() == Shape{24, 32});
    CHECK(model.frozen_row0 == std::vector<std::string>{"embed.table"});
  }
}

TEST_CASE("concat width equals the sum of branch widths for every mixed family") {
  const struct {
    Family family;
    Index seq_width;
  } cases[] = {{Family::CNN_x_FC, 83 * 32}, {Family::RNN_x_FC, 64}, {Family::CNN_RNN_x_FC, 64}};
  for (const auto& c : cases) {
    CAPTURE(family_to_string(c.family));
    ArchitectureSpec spec;
    spec.family = c.family;
    const ModelInstance model = build_model(spec, 23, 83, 1);
    const BuiltGraph bg = model.build_forward(2);
    bool found = false;
    for (const Node& n : bg.graph->nodes())
      found |= n.kind == OpKind::ConcatLast && n.shape == Shape{2, c.seq_width + 64};
    CHECK(found);
  }
}

TEST_CASE("family input signatures") {
  for (Family family : kAllFamilies) {
    CAPTURE(family_to_string(family));
    ArchitectureSpec spec;
    spec.family = family;
    const ModelInstance model = build_model(spec, 10, 12, 3);
    const BuiltGraph bg = model.build_forward(2);
    const auto inputs = bg.graph->input_names();
    const bool mixed = spec.needs_sequence() && spec.needs_fingerprint();
    CHECK(inputs.size() == (mixed ? 2 : 1));
    CHECK(spec.needs_sequence() == (bg.seq_input.graph != nullptr));
    CHECK(spec.needs_fingerprint() == (bg.fp_input.graph != nullptr));
  }
  ArchitectureSpec fc;
  fc.family = Family::FC;
  CHECK(fc.needs_fingerprint());
  CHECK_FALSE(fc.needs_sequence());
  const ModelInstance model = build_model(fc, 10, 12, 3);
  CHECK(model.params.at("fp1.w").shape() == Shape{167, 1024});
}

TEST_CASE("classification outputs lie strictly inside (0,1) for all families") {
  SplitMix64 rng(2024);
  for (Family family : kAllFamilies) {
    CAPTURE(family_to_string(family));
    ArchitectureSpec spec;
    spec.family = family;
    spec.task = Task::Classification;
    spec.fingerprint_widths = std::vector<Index>{32, 8};  // keep the test light
    const ModelInstance model = build_model(spec, 7, 9, 42);
    const BuiltGraph bg = model.build_forward(5);
    CHECK(bg.graph->node(bg.output.id).kind == OpKind::Sigmoid);

    std::map<std::string, const Tensor*> inputs;
    Tensor seq = random_indices(5, 9, 7, rng);
    Tensor fp = random_bits(5, rng);
    if (spec.needs_sequence()) inputs["seq"] = bind(seq);
    if (spec.needs_fingerprint()) inputs["fp"] = bind(fp);
    bg.graph->forward(model.params, inputs);
    const Tensor& out = bg.graph->value(bg.output);
    for (Index i = 0; i < out.size(); ++i) {
      CHECK(out[i] > 0.0);
      CHECK(out[i] < 1.0);
    }
  }
}

TEST_CASE("parameter_count: FC family closed form") {
  ArchitectureSpec spec;
  spec.family = Family::FC;
  const long expected = 167 * 1024 + 1024 + 1024 * 512 + 512 + 512 * 256 + 256 + 256 * 64 + 64 +
                        64 * 64 + 64 + 64 * 1 + 1;
  CHECK(parameter_count(spec, 5, 10) == expected);
  const ModelInstance model = build_model(spec, 5, 10, 0);
  CHECK(model.actual_parameter_count() == expected);
}

TEST_CASE("parameter_count equals the built tally for 100 random specs") {
  SplitMix64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    ArchitectureSpec spec;
    spec.family = kAllFamilies[rng.next_below(7)];
    spec.task = rng.next_below(2) ? Task::Classification : Task::Regression;
    SequenceBranchSpec sb;
    sb.embed_dim = 1 + static_cast<Index>(rng.next_below(8));
    sb.convs.clear();
    const int n_convs = 1 + static_cast<int>(rng.next_below(3));
    for (int i = 0; i < n_convs; ++i)
      sb.convs.push_back({1 + static_cast<Index>(rng.next_below(6)),
                          1 + static_cast<Index>(rng.next_below(4))});
    sb.cell = rng.next_below(2) ? CellKind::LSTM : CellKind::GRU;
    sb.hidden = 1 + static_cast<Index>(rng.next_below(8));
    spec.sequence_branch = sb;
    std::vector<Index> widths;
    const int n_fc = 1 + static_cast<int>(rng.next_below(3));
    for (int i = 0; i < n_fc; ++i) widths.push_back(1 + static_cast<Index>(rng.next_below(32)));
    spec.fingerprint_widths = widths;
    spec.head.clear();
    if (rng.next_below(2)) spec.head.push_back(1 + static_cast<Index>(rng.next_below(16)));
    spec.head.push_back(1);

    const Index vocab = 1 + static_cast<Index>(rng.next_below(30));
    const Index max_len = 1 + static_cast<Index>(rng.next_below(12));
    const ModelInstance model = build_model(spec, vocab, max_len, rng.next_u64());
    CHECK(parameter_count(spec, vocab, max_len) == model.actual_parameter_count());
  }
}

TEST_CASE("embedding contributes (vocab_size+1) * embed_dim parameters") {
  ArchitectureSpec spec;
  spec.family = Family::RNN;
  for (Index vocab : {1, 23, 54}) {
    const ModelInstance m = build_model(spec, vocab, 10, 0);
    CHECK(m.params.at("embed.table").size() == (vocab + 1) * 32);
    CHECK(parameter_count(spec, vocab + 1, 10) - parameter_count(spec, vocab, 10) == 32);
  }
}

TEST_CASE("build determinism: same spec and seed give bit-identical parameters") {
  ArchitectureSpec spec;
  spec.family = Family::CNN_RNN_x_FC;
  const ModelInstance a = build_model(spec, 12, 7, 99);
  const ModelInstance b = build_model(spec, 12, 7, 99);
  const ModelInstance c = build_model(spec, 12, 7, 100);
  REQUIRE(a.params.size() == b.params.size());
  bool all_equal = true, any_differs_from_c = false;
  for (const auto& [name, t] : a.params) {
    all_equal &= std::memcmp(t.data(), b.params.at(name).data(),
                             sizeof(Scalar) * static_cast<std::size_t>(t.size())) == 0;
    any_differs_from_c |= std::memcmp(t.data(), c.params.at(name).data(),
                                      sizeof(Scalar) * static_cast<std::size_t>(t.size())) != 0;
  }
  CHECK(all_equal);
  CHECK(any_differs_from_c);
}

TEST_CASE("invalid specs are rejected") {
  ArchitectureSpec no_fp;
  no_fp.family = Family::FC;
  no_fp.fingerprint_widths = std::nullopt;
  CHECK_THROWS_AS(no_fp.validate(), InvalidSpec);

  ArchitectureSpec no_seq;
  no_seq.family = Family::CNN;
  no_seq.sequence_branch = std::nullopt;
  CHECK_THROWS_AS(no_seq.validate(), InvalidSpec);

  ArchitectureSpec bad_head;
  bad_head.family = Family::FC;
  bad_head.head = {64, 2};
  CHECK_THROWS_AS(bad_head.validate(), InvalidSpec);
  bad_head.head = {};
  CHECK_THROWS_AS(bad_head.validate(), InvalidSpec);

  ArchitectureSpec no_convs;
  no_convs.family = Family::CNN;
  no_convs.sequence_branch->convs.clear();
  CHECK_THROWS_AS(no_convs.validate(), InvalidSpec);

  ArchitectureSpec ok;
  ok.family = Family::CNN_x_FC;
  CHECK_THROWS_AS(build_model(ok, 0, 5, 1), InvalidSpec);
  CHECK_THROWS_AS(build_model(ok, 5, 0, 1), InvalidSpec);
}

TEST_CASE("arch config text round-trips for every family") {
  for (Family family : kAllFamilies) {
    CAPTURE(family_to_string(family));
    ArchitectureSpec spec;
    spec.family = family;
    spec.task = family == Family::CNN ? Task::Classification : Task::Regression;
    if (spec.needs_sequence()) spec.sequence_branch->cell = CellKind::LSTM;
    const std::string text = arch_config_to_string(spec);
    CHECK(text.rfind("chemix-arch v1\n", 0) == 0);
    const ArchitectureSpec back = parse_arch_config(text);
    CHECK(arch_config_to_string(back) == text);
    CHECK(back.family == spec.family);
    CHECK(back.task == spec.task);
  }
  SUBCASE("defaults fill in when optional lines are omitted") {
    const ArchitectureSpec spec = parse_arch_config("chemix-arch v1\nfamily cnn_x_fc\n");
    CHECK(spec.task == Task::Regression);
    REQUIRE(spec.sequence_branch.has_value());
    CHECK(spec.sequence_branch->convs.size() == 2);
    CHECK(spec.fingerprint_widths == std::vector<Index>{1024, 512, 256, 64});
    CHECK(spec.head == std::vector<Index>{64, 1});
  }
  SUBCASE("bad configs throw with a line number") {
    CHECK_THROWS_AS(parse_arch_config("chemix-arch v2\nfamily fc\n"), InvalidSpec);
    CHECK_THROWS_AS(parse_arch_config("chemix-arch v1\nfamily nope\n"), InvalidSpec);
    CHECK_THROWS_AS(parse_arch_config("chemix-arch v1\nfamily fc\nconv x y\n"), InvalidSpec);
    CHECK_THROWS_AS(parse_arch_config("chemix-arch v1\n"), InvalidSpec);
  }
}
