#include <doctest.h>

#include <bit>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "mcpred/errors.hpp"
#include "mcpred/nn/autodiff.hpp"
#include "mcpred/nn/checkpoint.hpp"
#include "mcpred/nn/gradcheck.hpp"
#include "mcpred/nn/layers.hpp"
#include "mcpred/nn/parameters.hpp"
#include "mcpred/random.hpp"

using namespace mcpred;
using namespace mcpred::nn;

namespace {

using Build = std::function<Var(const Binder&)>;

Tensor random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// sum(out * R) for a fixed random R, so every output element matters.
Var weighted_sum(Var out, std::uint64_t seed = 99) {
  return sum(mul(out, out.tape->constant(random_tensor(out.rows(), out.cols(), seed))));
}

double check(ParameterStore& ps, const Build& build) {
  GradientSet grads(ps);
  {
    Tape tape;
    const Binder bind(tape, ps, &grads);
    tape.backward(build(bind));
  }
  auto loss = [&] {
    Tape tape(false);
    const Binder bind(tape, ps, nullptr);
    return build(bind).value().item();
  };
  const auto r = finite_difference_check(loss, ps, grads);
  return r.max_relative_error;
}

// Values bounded away from zero so kinked primitives stay differentiable.
Tensor away_from_zero(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Tensor t = random_tensor(rows, cols, seed, 0.2, 1.5);
  Rng sign(seed + 1);
  for (double& v : t.values()) v *= sign.below(2) ? 1.0 : -1.0;
  return t;
}

}  // namespace

TEST_CASE("softmax closed forms") {
  const double third = 1.0 / 3.0;
  const auto u = softmax(std::vector<double>{0.0, 0.0, 0.0});
  for (double p : u) CHECK(std::fabs(p - third) < 1e-9);
  const auto p = softmax(std::vector<double>{0.0, std::log(3.0)});
  CHECK(std::fabs(p[0] - 0.25) < 1e-9);
  CHECK(std::fabs(p[1] - 0.75) < 1e-9);
  CHECK_THROWS_AS(softmax(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("softmax properties on random inputs") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(1 + rng.below(12));
    for (double& v : x) v = rng.uniform(-50.0, 50.0);
    const auto p = softmax(x);
    CHECK(std::fabs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-9);
    for (double v : p) CHECK(v >= 0.0);
    CHECK(std::max_element(p.begin(), p.end()) - p.begin() == std::max_element(x.begin(), x.end()) - x.begin());
    std::vector<double> shifted = x;
    for (double& v : shifted) v += 100.0;
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::fabs(p[i] - q[i]) < 1e-9);
  }
}

TEST_CASE("tape value and gradient examples") {
  SUBCASE("tanh at zero") {
    Tape tape;
    Tensor u(1, 1, 0.0), du(1, 1, 0.0);
    const Var x = tape.leaf(u, &du);
    tape.backward(nn::tanh(x));
    CHECK(du.item() == doctest::Approx(1.0));
  }
  SUBCASE("linear map") {
    Tape tape;
    Tensor w = random_tensor(3, 2, 1), dw(3, 2);
    const Tensor xv = random_tensor(1, 3, 2);
    const Var x = tape.constant(xv);
    tape.backward(sum(matmul(x, tape.leaf(w, &dw))));
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 2; ++c) CHECK(dw(r, c) == doctest::Approx(xv[r]));
    }
  }
  SUBCASE("reuse accumulates") {
    Tape tape;
    Tensor a(1, 1, 3.0), da(1, 1, 0.0);
    const Var x = tape.leaf(a, &da);
    tape.backward(mul(x, x));
    CHECK(da.item() == doctest::Approx(6.0));
  }
}

TEST_CASE("backward misuse") {
  Tape tape;
  Tensor a(2, 2, 1.0), da(2, 2);
  const Var x = tape.leaf(a, &da);
  CHECK_THROWS_AS(tape.backward(x), std::logic_error);
  const Var s = sum(x);
  tape.backward(s);
  CHECK_THROWS_WITH_AS(tape.backward(s), "tape already consumed", std::logic_error);
}

TEST_CASE("primitive gradients match finite differences") {
  ParameterStore ps;
  const ParamId a = ps.add("a", away_from_zero(3, 4, 1));
  const ParamId b = ps.add("b", away_from_zero(3, 4, 2));
  const ParamId row = ps.add("row", away_from_zero(1, 4, 3));
  const ParamId w = ps.add("w", random_tensor(4, 2, 4));
  const ParamId pos = ps.add("pos", random_tensor(3, 4, 5, 0.5, 2.0));
  const ParamId table = ps.add("table", random_tensor(6, 4, 6));
  const ParamId gain = ps.add("gain", random_tensor(1, 4, 7, 0.5, 1.5));

  const std::vector<std::pair<const char*, Build>> cases = {
      {"matmul", [&](const Binder& p) { return weighted_sum(matmul(p(a), p(w))); }},
      {"add", [&](const Binder& p) { return weighted_sum(add(p(a), p(b))); }},
      {"add row", [&](const Binder& p) { return weighted_sum(add(p(a), p(row))); }},
      {"sub row", [&](const Binder& p) { return weighted_sum(sub(p(a), p(row))); }},
      {"mul", [&](const Binder& p) { return weighted_sum(mul(p(a), p(b))); }},
      {"mul row", [&](const Binder& p) { return weighted_sum(mul(p(a), p(row))); }},
      {"div", [&](const Binder& p) { return weighted_sum(div(p(a), p(pos))); }},
      {"scale", [&](const Binder& p) { return weighted_sum(scale(p(a), -2.5)); }},
      {"tanh", [&](const Binder& p) { return weighted_sum(nn::tanh(p(a))); }},
      {"relu", [&](const Binder& p) { return weighted_sum(relu(p(a))); }},
      {"sqrt", [&](const Binder& p) { return weighted_sum(nn::sqrt(p(pos))); }},
      {"abs", [&](const Binder& p) { return weighted_sum(nn::abs(p(a))); }},
      {"row_sum", [&](const Binder& p) { return weighted_sum(row_sum(p(a))); }},
      {"transpose", [&](const Binder& p) { return weighted_sum(transpose(p(a))); }},
      {"slices", [&](const Binder& p) { return weighted_sum(slice_cols(slice_rows(p(a), 1, 2), 1, 2)); }},
      {"concat", [&](const Binder& p) {
         const Var rows[] = {p(a), p(row)};
         const Var cols[] = {p(a), p(b)};
         return add(weighted_sum(concat_rows(rows)), weighted_sum(concat_cols(cols)));
       }},
      {"gather", [&](const Binder& p) {
         const std::int32_t ids[] = {0, 3, 3, 5};
         return weighted_sum(gather_rows(p(table), ids));
       }},
      {"layer_norm", [&](const Binder& p) { return weighted_sum(layer_norm(p(a), p(gain), p(row))); }},
      {"softmax", [&](const Binder& p) { return weighted_sum(softmax_rows(p(a))); }},
      {"masked softmax", [&](const Binder& p) {
         const bool keys[] = {true, false, true, true};
         const bool queries[] = {true, true, false};
         return weighted_sum(softmax_rows(p(a), keys, queries));
       }},
      {"log_softmax_at", [&](const Binder& p) { return log_softmax_at(p(row), 2); }},
  };
  for (const auto& [name, build] : cases) {
    INFO(name);
    CHECK(check(ps, build) < 1e-6);
  }
}

TEST_CASE("finite differences on a quadratic are essentially exact") {
  ParameterStore ps;
  const ParamId x = ps.add("x", random_tensor(2, 3, 8));
  CHECK(check(ps, [&](const Binder& p) { return sum(mul(p(x), p(x))); }) < 1e-10);
}

TEST_CASE("finite difference check rejects a non-deterministic loss") {
  ParameterStore ps;
  ps.add("x", Tensor(1, 1, 1.0));
  GradientSet grads(ps);
  double drift = 0.0;
  CHECK_THROWS_AS(finite_difference_check([&] { return drift += 1.0; }, ps, grads), NumericError);
}

TEST_CASE("layer norm standardises each row") {
  Tape tape(false);
  const Tensor x = random_tensor(5, 16, 9, -10.0, 10.0);
  const Var out = layer_norm(tape.constant(x), tape.constant(Tensor(1, 16, 1.0)), tape.constant(Tensor(1, 16, 0.0)));
  for (std::size_t r = 0; r < 5; ++r) {
    const auto row = out.value().row_span(r);
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / 16.0;
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= 16.0;
    CHECK(std::fabs(mean) < 1e-7);
    CHECK(std::fabs(var - 1.0) < 1e-5);
  }
}

TEST_CASE("dropout preserves the expectation and is reproducible") {
  Tape tape(false);
  const Var x = tape.constant(Tensor(1, 10000, 2.0));
  Rng rng(4);
  const Var y = dropout(x, 0.3, rng);
  const auto v = y.value().values();
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  CHECK(std::fabs(mean - 2.0) / 2.0 < 0.02);
  Rng again(4);
  CHECK(dropout(x, 0.3, again).value() == y.value());
  Rng unused(4);
  CHECK(dropout(x, 0.0, unused).value() == x.value());
}

TEST_CASE("encoder layer contracts") {
  ParameterStore ps;
  const auto layer = EncoderLayerParams::create(ps, "enc", 8, 2, 12, ParamGroup::main, 3);
  CHECK(layer.head_dim() == 4);
  CHECK_THROWS_AS(EncoderLayerParams::create(ps, "bad", 8, 3, 12, ParamGroup::main, 3), std::invalid_argument);
  const Tensor input = random_tensor(5, 8, 11);

  SUBCASE("shape and attention rows") {
    Tape tape(false);
    const Binder bind(tape, ps, nullptr);
    AttentionTrace trace;
    const bool valid[] = {true, true, true, false, true};
    const Var out = encoder_layer(tape.constant(input), layer, bind, valid, {}, &trace);
    CHECK(out.rows() == 5);
    CHECK(out.cols() == 8);
    for (const auto& probs : trace.probs) {
      for (std::size_t r = 0; r < 5; ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < 5; ++c) total += probs(r, c);
        if (valid[r]) CHECK(std::fabs(total - 1.0) < 1e-9);
        CHECK(probs(r, 3) == 0.0);
      }
    }
  }
  SUBCASE("one valid position attends to itself") {
    Tape tape(false);
    const Binder bind(tape, ps, nullptr);
    AttentionTrace trace;
    const bool valid[] = {false, false, true, false, false};
    multi_head_attention(tape.constant(input), layer, bind, valid, &trace);
    const std::size_t hd = layer.head_dim();
    for (std::size_t h = 0; h < trace.context.size(); ++h) {
      for (std::size_t k = 0; k < hd; ++k) CHECK(trace.context[h](2, k) == doctest::Approx(trace.values(2, h * hd + k)));
    }
  }
  SUBCASE("pure without dropout") {
    auto run = [&] {
      Tape tape(false);
      const Binder bind(tape, ps, nullptr);
      return encoder_layer(tape.constant(input), layer, bind, {}, {}).value();
    };
    CHECK(run() == run());
  }
  SUBCASE("gradients") {
    const ParamId x = ps.add("x", input);
    const bool valid[] = {true, true, false, true, true};
    const double err = check(ps, [&](const Binder& p) { return weighted_sum(encoder_layer(p(x), layer, p, valid, {})); });
    CHECK(err < 1e-6);
  }
}

TEST_CASE("gradient sets reduce in order") {
  ParameterStore ps;
  ps.add("a", Tensor(1, 2));
  ps.add("b", Tensor(1, 1));
  GradientSet total(ps), part(ps);
  part.sink(0)[0] = 1.5;
  total.absorb(part);
  CHECK(total[0][0] == 1.5);
  CHECK(part[0][0] == 0.0);
  CHECK_FALSE(total.touched(1));
  part.sink(1)[0] = std::nan("");
  total.absorb(part);
  CHECK_FALSE(total.all_finite());
}

TEST_CASE("parameter store") {
  ParameterStore ps;
  ps.add("a", Tensor(2, 2, 1.0));
  CHECK_THROWS_AS(ps.add("a", Tensor(1, 1)), std::invalid_argument);
  CHECK(ps.find("a") == 0u);
  CHECK_FALSE(ps.find("b"));
  CHECK(ps.scalar_count() == 4);
  CHECK(ps.squared_norm() == 4.0);
  CHECK(init_uniform(3, 3, 0.1, 5, "x") == init_uniform(3, 3, 0.1, 5, "x"));
  CHECK_FALSE(init_uniform(3, 3, 0.1, 5, "x") == init_uniform(3, 3, 0.1, 5, "y"));
  const Tensor xav = init_xavier(4, 2, 1, "w");
  for (double v : xav.values()) CHECK(std::fabs(v) <= 1.0);
}

TEST_CASE("checkpoint round trip is byte exact") {
  CheckpointData data;
  data.metadata = R"({"k":1})";
  data.tensors.push_back({"w", random_tensor(3, 5, 1)});
  data.tensors.push_back({"b", Tensor({4}, {1.0, -0.0, 1e-300, 3.5})});
  std::stringstream first;
  write_checkpoint(first, data);
  const CheckpointData back = read_checkpoint(first);
  CHECK(back == data);
  std::stringstream second;
  write_checkpoint(second, back);
  CHECK(second.str() == first.str());
  CHECK(std::bit_cast<std::uint64_t>(back.tensors[1].value[1]) == std::bit_cast<std::uint64_t>(-0.0));

  SUBCASE("bad magic") {
    std::string bytes = first.str();
    bytes[0] = 'X';
    std::istringstream in(bytes);
    CHECK_THROWS_AS(read_checkpoint(in), DataError);
  }
  SUBCASE("truncated") {
    const std::string bytes = first.str();
    std::istringstream in(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_checkpoint(in), DataError);
  }
}

TEST_CASE("tensor construction checks the value count") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), std::invalid_argument);
  CHECK(Tensor::row({1.0, 2.0}).cols() == 2);
  CHECK_FALSE(Tensor({1, 2}, {1.0, std::numeric_limits<double>::infinity()}).all_finite());
}
