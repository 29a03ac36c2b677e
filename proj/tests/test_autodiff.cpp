#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gradcheck.hpp"
#include "svla/autodiff.hpp"
#include "svla/nn.hpp"
#include "svla/rng.hpp"

using namespace svla;
using Eigen::MatrixXd;

namespace {

MatrixXd random_matrix(int r, int c, Rng& rng, double scale = 1.0) {
  MatrixXd m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

}  // namespace

TEST_CASE("forward values of basic ops") {
  Graph g;
  MatrixXd a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  Var va = g.input(a), vb = g.input(b);

  CHECK(add(va, vb).value()(1, 1) == 12);
  CHECK(sub(va, vb).value()(0, 0) == -4);
  CHECK(mul(va, vb).value()(0, 1) == 12);
  CHECK(matmul(va, vb).value()(0, 0) == 19);
  CHECK(transpose(va).value()(0, 1) == 3);
  CHECK(scale(va, 2.0).value()(1, 0) == 6);
  CHECK(sum_all(va).value()(0, 0) == 10);
  CHECK(mean_all(va).value()(0, 0) == 2.5);
}

TEST_CASE("max over rows with tie splitting") {
  Graph g;
  MatrixXd m(2, 2);
  m << 1, 4, 3, 2;
  Var v = g.input(m);
  Var p = max_over_rows(v);
  CHECK(p.value()(0, 0) == 3);
  CHECK(p.value()(0, 1) == 4);

  // duplicated winning rows share the gradient equally
  Graph g2;
  MatrixXd t(3, 1);
  t << 5, 5, 1;
  Var vt = g2.input(t);
  Var loss = sum_all(max_over_rows(vt));
  g2.backward(loss);
  CHECK(vt.grad()(0, 0) == doctest::Approx(0.5));
  CHECK(vt.grad()(1, 0) == doctest::Approx(0.5));
  CHECK(vt.grad()(2, 0) == 0.0);
}

TEST_CASE("softmax rows sum to one and backward matches fd") {
  ParameterStore s;
  Rng rng(11);
  s.add("x", random_matrix(3, 4, rng), ParamGroup::vlm);
  s.add("w", random_matrix(4, 2, rng), ParamGroup::vlm);

  Graph g;
  Var sm = softmax_rows(g.param("x", s.at("x")));
  for (int i = 0; i < 3; ++i) {
    CHECK(sm.value().row(i).sum() == doctest::Approx(1.0));
  }

  auto build = [](Graph& gr, const ParameterStore& st) {
    Var x = gr.param("x", st.at("x"));
    Var w = gr.param("w", st.at("w"));
    return sum_all(tanh_act(matmul(softmax_rows(x), w)));
  };
  CHECK(gradient_check(s, build) == "");
}

TEST_CASE("clamp: value, flag, and gradient gating") {
  Graph g;
  MatrixXd m(1, 3);
  m << -2.0, 0.5, 3.0;
  bool flag = false;
  Var c = clamp_val(g.input(m), 0.0, 1.0, &flag);
  CHECK(flag);
  CHECK(c.value()(0, 0) == 0.0);
  CHECK(c.value()(0, 1) == 0.5);
  CHECK(c.value()(0, 2) == 1.0);

  Graph g2;
  bool flag2 = false;
  Var in = g2.input(m);
  Var loss = sum_all(clamp_val(in, 0.0, 1.0, &flag2));
  g2.backward(loss);
  CHECK(in.grad()(0, 0) == 0.0);  // clamped entries block gradient
  CHECK(in.grad()(0, 1) == 1.0);
  CHECK(in.grad()(0, 2) == 0.0);

  Graph g3;
  bool flag3 = false;
  clamp_val(g3.input(MatrixXd::Constant(1, 1, 0.5)), 0.0, 1.0, &flag3);
  CHECK_FALSE(flag3);
}

TEST_CASE("normalize_row: unit output, zero maps to e0") {
  Graph g;
  MatrixXd q(1, 4);
  q << 3, 0, 4, 0;
  Var n = normalize_row(g.input(q));
  CHECK(n.value()(0, 0) == doctest::Approx(0.6));
  CHECK(n.value()(0, 2) == doctest::Approx(0.8));

  Var z = normalize_row(g.input(MatrixXd::Zero(1, 4)));
  CHECK(z.value()(0, 0) == 1.0);
  CHECK(z.value()(0, 1) == 0.0);

  // zero-input branch contributes zero gradient
  Graph g2;
  Var zin = g2.input(MatrixXd::Zero(1, 4));
  Var loss = sum_all(normalize_row(zin));
  g2.backward(loss);
  CHECK(zin.grad().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gather_rows: lookup and out-of-range id named") {
  Graph g;
  MatrixXd table(3, 2);
  table << 1, 2, 3, 4, 5, 6;
  Var t = g.input(table);
  Var picked = gather_rows(t, {2, 0, 2});
  CHECK(picked.value()(0, 0) == 5);
  CHECK(picked.value()(1, 1) == 2);

  try {
    gather_rows(t, {7});
    FAIL("expected out_of_range");
  } catch (const std::out_of_range& e) {
    CHECK(std::string(e.what()).find("7") != std::string::npos);
  }

  // gradient scatters and accumulates over repeated ids
  Graph g2;
  Var t2 = g2.param("t", table);
  g2.backward(sum_all(gather_rows(t2, {2, 0, 2})));
  CHECK(t2.grad()(2, 0) == 2.0);
  CHECK(t2.grad()(0, 0) == 1.0);
  CHECK(t2.grad()(1, 0) == 0.0);
}

TEST_CASE("graph guards") {
  Graph g;
  Var a = g.input(MatrixXd::Ones(2, 2));
  Var s = sum_all(a);
  CHECK_THROWS_AS(g.backward(a), std::invalid_argument);  // non-scalar loss
  g.backward(s);
  CHECK_THROWS_AS(g.backward(s), std::logic_error);  // backward twice

  Graph g2;
  Var x = g2.input(MatrixXd::Ones(2, 2));
  Var y = g2.input(MatrixXd::Ones(3, 2));
  CHECK_THROWS_AS(add(x, y), std::invalid_argument);
  CHECK_THROWS_AS(matmul(x, y), std::invalid_argument);
  CHECK_THROWS_AS(slice_rows(x, 1, 4), std::invalid_argument);
}

TEST_CASE("gradcheck: composite expression over every op") {
  ParameterStore s;
  Rng rng(5);
  s.add("a", random_matrix(3, 4, rng), ParamGroup::vlm);
  s.add("b", random_matrix(4, 4, rng), ParamGroup::vlm);
  s.add("row", random_matrix(1, 4, rng), ParamGroup::vlm);
  s.add("gain", MatrixXd::Ones(1, 4) + 0.1 * random_matrix(1, 4, rng),
        ParamGroup::vlm);
  s.add("bias", 0.1 * random_matrix(1, 4, rng), ParamGroup::vlm);
  s.add("table", random_matrix(5, 4, rng), ParamGroup::vlm);

  auto build = [](Graph& g, const ParameterStore& st) {
    Var a = g.param("a", st.at("a"));
    Var b = g.param("b", st.at("b"));
    Var row = g.param("row", st.at("row"));
    Var gain = g.param("gain", st.at("gain"));
    Var bias = g.param("bias", st.at("bias"));
    Var table = g.param("table", st.at("table"));

    Var h = add_rowwise(matmul(a, b), row);              // 3×4
    h = layer_norm_rows(h, gain, bias);
    h = add(h, gather_rows(table, {0, 3, 1}));
    Var att = softmax_rows(matmul(h, transpose(h)));     // 3×3
    h = matmul(att, h);
    Var t = tanh_act(slice_cols(h, 0, 2));
    Var sgm = sigmoid(slice_cols(h, 2, 2));
    Var joined = concat_cols({t, sgm});
    joined = concat_rows({joined, scale(sub(joined, joined), 1.0)});
    Var pooled = max_over_rows(mul(joined, joined));     // 1×4
    Var nrm = normalize_row(add(pooled, row));
    Var safe = clamp_val(sigmoid(nrm), 1e-7, 1.0 - 1e-7);
    Var lg = log_val(safe);
    return add(mean_all(abs_val(lg)), sum_all(slice_rows(h, 1, 2)));
  };
  CHECK(gradient_check(s, build) == "");
}

TEST_CASE("gradcheck: nn helpers (linear, mlp2, attention, block)") {
  ParameterStore s;
  Rng rng(17);
  init_linear(s, "lin", 4, 3, rng, ParamGroup::vlm);
  init_mlp2(s, "mlp", 4, 5, 4, rng, ParamGroup::vlm);
  init_attention(s, "att", 4, rng, ParamGroup::vlm);
  init_self_block(s, "blk", 4, 6, rng, ParamGroup::vlm);
  s.add("x", random_matrix(3, 4, rng), ParamGroup::vlm);

  auto build = [](Graph& g, const ParameterStore& st) {
    Var x = g.param("x", st.at("x"));
    Var a = attention(g, st, "att", x, x, 2);
    Var blk = self_block(g, st, "blk", add(x, a), 2);
    Var m = mlp2(g, st, "mlp", blk);
    Var l = linear(g, st, "lin", m);
    return mean_all(mul(l, l));
  };
  CHECK(gradient_check(s, build) == "");
}

TEST_CASE("attention with a single key puts softmax weight 1 on it") {
  ParameterStore s;
  Rng rng(23);
  init_attention(s, "att", 4, rng, ParamGroup::action_head);
  Graph g;
  Var q = g.input(random_matrix(1, 4, rng));
  Var kv = g.input(random_matrix(1, 4, rng));
  Var out = attention(g, s, "att", q, kv, 2);
  // with one key the attention output is exactly v·Wo
  MatrixXd manual = (kv.value() * s.at("att.wv")) * s.at("att.wo");
  CHECK((out.value() - manual).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero-initialized mlp2 maps everything to zero") {
  ParameterStore s;
  Rng rng(29);
  init_mlp2(s, "adapter", 6, 8, 10, rng, ParamGroup::adapter, /*zero_last=*/true);
  CHECK(s.at("adapter.fc2.w").cwiseAbs().maxCoeff() == 0.0);
  Graph g;
  Var out = mlp2(g, s, "adapter", g.input(random_matrix(1, 6, rng)));
  CHECK(out.value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("layer norm forward matches a manual computation") {
  Graph g;
  MatrixXd x(1, 4);
  x << 1, 2, 3, 4;
  Var gain = g.input(MatrixXd::Ones(1, 4));
  Var bias = g.input(MatrixXd::Zero(1, 4));
  Var y = layer_norm_rows(g.input(x), gain, bias, 0.0);
  const double mu = 2.5;
  const double sigma = std::sqrt(1.25);
  for (int j = 0; j < 4; ++j) {
    CHECK(y.value()(0, j) == doctest::Approx((x(0, j) - mu) / sigma));
  }
}
