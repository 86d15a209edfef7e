#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "finegrain/optim.hpp"
#include "finegrain/tensor.hpp"
#include "gradcheck.hpp"

using namespace finegrain;
using fgtest::finite_diff_check;
using fgtest::weighted_sum;

TEST_CASE("matmul identity and hand arithmetic") {
  Tape tape;
  auto eye = tensor_from({2, 2}, {1, 0, 0, 1});
  auto m = tensor_from({2, 2}, {1, 2, 3, 4});
  auto out = matmul(tape, eye, m);
  CHECK(out->values == std::vector<double>{1, 2, 3, 4});

  auto a = tensor_from({1, 2}, {1, 2});
  auto b = tensor_from({2, 1}, {3, 4});
  auto c = matmul(tape, a, b);
  CHECK(c->values[0] == doctest::Approx(11.0));
}

TEST_CASE("matmul shape error names both shapes") {
  Tape tape;
  auto a = make_tensor({2, 3});
  auto b = make_tensor({2, 3});
  CHECK_THROWS_WITH_AS(matmul(tape, a, b), doctest::Contains("[2x3]"), DimError);
}

TEST_CASE("matmul gradient vs finite differences") {
  Rng rng(42);
  auto a = make_tensor({3, 4}, 0.0, true);
  auto b = make_tensor({4, 2}, 0.0, true);
  fgtest::fill_random(a, rng);
  fgtest::fill_random(b, rng);
  auto loss = [&]() {
    Tape tape;
    return weighted_sum(tape, matmul(tape, a, b))->values[0];
  };
  {
    Tape tape;
    auto l = weighted_sum(tape, matmul(tape, a, b));
    tape.backward(l);
  }
  auto res = finite_diff_check({{"a", a}, {"b", b}}, loss, 1e-5);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("batched matmul gradient") {
  Rng rng(7);
  auto a = make_tensor({2, 3, 4}, 0.0, true);
  auto b = make_tensor({2, 4, 2}, 0.0, true);
  fgtest::fill_random(a, rng);
  fgtest::fill_random(b, rng);
  auto loss = [&]() {
    Tape tape;
    return weighted_sum(tape, matmul(tape, a, b))->values[0];
  };
  {
    Tape tape;
    tape.backward(weighted_sum(tape, matmul(tape, a, b)));
  }
  CHECK(finite_diff_check({{"a", a}, {"b", b}}, loss, 1e-5).max_rel_err < 1e-5);
}

TEST_CASE("conv1d identity kernel") {
  Tape tape;
  auto x = tensor_from({1, 4}, {1, -2, 3, 0.5});
  auto w = tensor_from({1, 1, 1}, {1});
  auto b = tensor_from({1}, {0});
  auto out = conv1d(tape, x, w, b, 0);
  CHECK(out->values == x->values);
}

TEST_CASE("conv1d hand sum with padding") {
  Tape tape;
  auto x = tensor_from({1, 3}, {1, 2, 3});
  auto w = tensor_from({1, 1, 3}, {1, 1, 1});
  auto b = tensor_from({1}, {0});
  auto out = conv1d(tape, x, w, b, 1);
  REQUIRE(out->shape == std::vector<int>{1, 3});
  CHECK(out->values[0] == doctest::Approx(3));
  CHECK(out->values[1] == doctest::Approx(6));
  CHECK(out->values[2] == doctest::Approx(5));
}

TEST_CASE("conv1d rejects kernels longer than the padded input") {
  Tape tape;
  auto x = make_tensor({1, 1});
  auto w = make_tensor({1, 1, 3});
  auto b = make_tensor({1});
  CHECK_THROWS_AS(conv1d(tape, x, w, b, 0), ConfigError);
}

TEST_CASE("conv1d gradient vs finite differences") {
  Rng rng(3);
  auto x = make_tensor({2, 7}, 0.0, true);
  auto w = make_tensor({3, 2, 3}, 0.0, true);
  auto b = make_tensor({3}, 0.0, true);
  fgtest::fill_random(x, rng);
  fgtest::fill_random(w, rng);
  fgtest::fill_random(b, rng);
  auto loss = [&]() {
    Tape tape;
    return weighted_sum(tape, conv1d(tape, x, w, b, 1))->values[0];
  };
  {
    Tape tape;
    tape.backward(weighted_sum(tape, conv1d(tape, x, w, b, 1)));
  }
  auto res = finite_diff_check({{"x", x}, {"w", w}, {"b", b}}, loss, 1e-5);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("softmax basics") {
  Tape tape;
  auto x = tensor_from({1, 2}, {0, 0});
  auto s = softmax_last(tape, x);
  CHECK(s->values[0] == doctest::Approx(0.5));
  CHECK(s->values[1] == doctest::Approx(0.5));

  auto c = tensor_from({1, 4}, {3.7, 3.7, 3.7, 3.7});
  auto sc = softmax_last(tape, c);
  for (double v : sc->values) CHECK(v == doctest::Approx(0.25));

  auto big = tensor_from({1, 2}, {1000, 0});
  auto sb = softmax_last(tape, big);
  CHECK(all_finite(*sb));
  CHECK(sb->values[0] == doctest::Approx(1.0));
  CHECK(sb->values[1] == doctest::Approx(0.0));
}

TEST_CASE("softmax sums to one and is shift invariant") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tape tape;
    auto x = make_tensor({1, 9});
    fgtest::fill_random(x, rng, -5, 5);
    auto s = softmax_last(tape, x);
    double sum = 0;
    for (double v : s->values) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-12);

    auto shifted = make_tensor({1, 9});
    for (size_t i = 0; i < 9; ++i) shifted->values[i] = x->values[i] + 13.25;
    auto s2 = softmax_last(tape, shifted);
    for (size_t i = 0; i < 9; ++i) CHECK(std::abs(s->values[i] - s2->values[i]) < 1e-9);
  }
}

TEST_CASE("masked softmax zeroes padded positions exactly") {
  Tape tape;
  auto x = tensor_from({1, 5}, {1, 2, 3, 100, 100});
  auto s = softmax_last(tape, x, {3});
  CHECK(s->values[3] == 0.0);
  CHECK(s->values[4] == 0.0);
  double sum = s->values[0] + s->values[1] + s->values[2];
  CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("softmax gradient vs finite differences") {
  Rng rng(5);
  auto x = make_tensor({2, 6}, 0.0, true);
  fgtest::fill_random(x, rng, -2, 2);
  auto loss = [&]() {
    Tape tape;
    return weighted_sum(tape, softmax_last(tape, x))->values[0];
  };
  {
    Tape tape;
    tape.backward(weighted_sum(tape, softmax_last(tape, x)));
  }
  CHECK(finite_diff_check({{"x", x}}, loss, 1e-5).max_rel_err < 1e-5);
}

namespace {

BatchNormState make_bn(ParamStore& store, const std::string& name, int c) {
  BatchNormState bn;
  bn.gamma = store.add_param(name + ".gamma", {c});
  bn.beta = store.add_param(name + ".beta", {c});
  bn.running_mean = store.add_buffer(name + ".rm", {c});
  bn.running_var = store.add_buffer(name + ".rv", {c}, 1.0);
  std::fill(bn.gamma->values.begin(), bn.gamma->values.end(), 1.0);
  return bn;
}

}  // namespace

TEST_CASE("batch norm zero-variance input maps to zero") {
  Tape tape;
  ParamStore store;
  auto bn = make_bn(store, "bn", 2);
  auto x = tensor_from({2, 3}, {4, 4, 4, -1, -1, -1});
  auto out = batch_norm(tape, x, bn, /*train=*/true);
  for (double v : out->values) CHECK(v == doctest::Approx(0.0));
  CHECK(all_finite(*out));
}

TEST_CASE("batch norm normalizes per channel in train mode") {
  Rng rng(9);
  Tape tape;
  ParamStore store;
  auto bn = make_bn(store, "bn", 3);
  auto x = make_tensor({2, 3, 5});
  fgtest::fill_random(x, rng, -3, 3);
  auto out = batch_norm(tape, x, bn, true);
  for (int c = 0; c < 3; ++c) {
    double mean = 0, var = 0;
    for (int b = 0; b < 2; ++b)
      for (int n = 0; n < 5; ++n) mean += out->values[(static_cast<size_t>(b) * 3 + c) * 5 + n];
    mean /= 10;
    for (int b = 0; b < 2; ++b)
      for (int n = 0; n < 5; ++n) {
        double d = out->values[(static_cast<size_t>(b) * 3 + c) * 5 + n] - mean;
        var += d * d;
      }
    var /= 10;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-4);  // eps pulls variance slightly under 1
  }
}

TEST_CASE("batch norm eval mode uses running statistics") {
  Tape tape;
  ParamStore store;
  auto bn = make_bn(store, "bn", 1);
  bn.running_mean->values[0] = 2.0;
  bn.running_var->values[0] = 4.0;
  auto x = tensor_from({1, 2}, {2.0, 6.0});
  auto out = batch_norm(tape, x, bn, /*train=*/false);
  CHECK(out->values[0] == doctest::Approx(0.0));
  CHECK(out->values[1] == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("batch norm gradient vs finite differences") {
  Rng rng(13);
  ParamStore store;
  auto bn = make_bn(store, "bn", 4);
  for (double& v : bn.gamma->values) v = rng.uniform(0.5, 1.5);
  for (double& v : bn.beta->values) v = rng.uniform(-0.5, 0.5);
  auto x = make_tensor({4, 6}, 0.0, true);
  fgtest::fill_random(x, rng, -2, 2);
  auto loss = [&]() {
    Tape tape;
    return weighted_sum(tape, batch_norm(tape, x, bn, true))->values[0];
  };
  {
    Tape tape;
    tape.backward(weighted_sum(tape, batch_norm(tape, x, bn, true)));
  }
  auto res = finite_diff_check({{"x", x}, {"gamma", bn.gamma}, {"beta", bn.beta}}, loss, 1e-5);
  CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("layer norm matches the direct formula") {
  Tape tape;
  auto gain = tensor_from({3}, {1, 1, 1});
  auto bias = tensor_from({3}, {0, 0, 0});
  auto x = tensor_from({3, 1}, {1, 2, 3});
  auto out = layer_norm(tape, x, gain, bias);
  CHECK(out->values[0] == doctest::Approx(-1.2247).epsilon(1e-3));
  CHECK(out->values[1] == doctest::Approx(0.0).epsilon(1e-3));
  CHECK(out->values[2] == doctest::Approx(1.2247).epsilon(1e-3));
}

TEST_CASE("layer norm gradient vs finite differences") {
  Rng rng(21);
  auto gain = make_tensor({4}, 0.0, true);
  auto bias = make_tensor({4}, 0.0, true);
  for (double& v : gain->values) v = rng.uniform(0.5, 1.5);
  fgtest::fill_random(bias, rng, -0.3, 0.3);
  auto x = make_tensor({2, 4, 3}, 0.0, true);
  fgtest::fill_random(x, rng, -2, 2);
  auto loss = [&]() {
    Tape tape;
    return weighted_sum(tape, layer_norm(tape, x, gain, bias))->values[0];
  };
  {
    Tape tape;
    tape.backward(weighted_sum(tape, layer_norm(tape, x, gain, bias)));
  }
  auto res = finite_diff_check({{"x", x}, {"gain", gain}, {"bias", bias}}, loss, 1e-5);
  CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("relu clamps negatives") {
  Tape tape;
  auto x = tensor_from({1, 3}, {-1, 0, 2});
  auto out = relu(tape, x);
  CHECK(out->values == std::vector<double>{0, 0, 2});
}

TEST_CASE("dropout contracts") {
  auto x = tensor_from({1, 8}, {1, 2, 3, 4, 5, 6, 7, 8});
  Rng rng(1);
  {
    Tape tape;
    auto out = dropout(tape, x, 0.5, /*train=*/false, rng);
    CHECK(out->values == x->values);  // eval mode is the exact identity
  }
  {
    Tape tape;
    auto out = dropout(tape, x, 0.0, /*train=*/true, rng);
    CHECK(out->values == x->values);  // rate 0 is the exact identity
  }
  {
    Tape tape;
    auto out = dropout(tape, x, 0.5, /*train=*/true, rng);
    for (size_t i = 0; i < 8; ++i) {
      if (out->values[i] != 0.0) CHECK(out->values[i] == doctest::Approx(x->values[i] * 2.0));
    }
  }
  Tape tape;
  CHECK_THROWS_AS(dropout(tape, x, 1.0, true, rng), ConfigError);
}

TEST_CASE("max_pool_length keeps per-channel maxima and routes gradient to the argmax") {
  Tape tape;
  auto x = tensor_from({2, 3}, {1, 5, 3, 2, 2, 2});
  x->requires_grad = true;
  auto out = max_pool_length(tape, x);
  REQUIRE(out->shape == std::vector<int>{1, 2});
  CHECK(out->values == std::vector<double>{5, 2});
  auto total = sum_all(tape, out);
  tape.backward(total);
  // ties break toward the lowest index: channel 1 max is position 0
  CHECK(x->grad == std::vector<double>{0, 1, 0, 1, 0, 0});
}

TEST_CASE("max pool conserves gradient mass per channel") {
  Rng rng(33);
  auto x = make_tensor({3, 11}, 0.0, true);
  fgtest::fill_random(x, rng);
  Tape tape;
  auto out = max_pool_length(tape, x);
  tape.backward(sum_all(tape, out));
  for (int c = 0; c < 3; ++c) {
    double mass = 0;
    int nonzero = 0;
    for (int l = 0; l < 11; ++l) {
      double g = x->grad[static_cast<size_t>(c) * 11 + l];
      mass += g;
      nonzero += g != 0.0;
    }
    CHECK(mass == doctest::Approx(1.0));
    CHECK(nonzero == 1);
  }
}

TEST_CASE("replicate tiles and sums over replicas") {
  Tape tape;
  auto x = tensor_from({2, 1}, {3.5, -1.0});
  x->requires_grad = true;
  auto out = replicate_length(tape, x, 3);
  CHECK(out->values == std::vector<double>{3.5, 3.5, 3.5, -1, -1, -1});
  tape.backward(sum_all(tape, out));
  CHECK(x->grad == std::vector<double>{3, 3});
}

TEST_CASE("replicate_channels tiles a row") {
  Tape tape;
  auto x = tensor_from({1, 3}, {1, 2, 3});
  x->requires_grad = true;
  auto out = replicate_channels(tape, x, 2);
  CHECK(out->values == std::vector<double>{1, 2, 3, 1, 2, 3});
  tape.backward(sum_all(tape, out));
  CHECK(x->grad == std::vector<double>{2, 2, 2});
}

TEST_CASE("add requires equal shapes") {
  Tape tape;
  auto a = make_tensor({2, 3});
  auto b = make_tensor({3, 2});
  CHECK_THROWS_AS(add(tape, a, b), DimError);
}

TEST_CASE("bce with logits") {
  {
    Tape tape;
    auto logits = tensor_from({2, 4}, std::vector<double>(8, 0.0));
    auto targets = tensor_from({2, 4}, {1, 0, 1, 0, 0, 1, 1, 0});
    auto loss = bce_with_logits_mean(tape, logits, targets);
    CHECK(loss->values[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  {
    Tape tape;
    auto logits = tensor_from({1, 1}, {20.0});
    auto targets = tensor_from({1, 1}, {1.0});
    auto loss = bce_with_logits_mean(tape, logits, targets);
    CHECK(loss->values[0] < 1e-8);
  }
}

TEST_CASE("bce gradient vs finite differences") {
  Rng rng(77);
  auto logits = make_tensor({3, 4}, 0.0, true);
  fgtest::fill_random(logits, rng, -3, 3);
  auto targets = make_tensor({3, 4});
  for (double& v : targets->values) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  auto loss = [&]() {
    Tape tape;
    return bce_with_logits_mean(tape, logits, targets)->values[0];
  };
  {
    Tape tape;
    tape.backward(bce_with_logits_mean(tape, logits, targets));
  }
  CHECK(finite_diff_check({{"logits", logits}}, loss, 1e-5).max_rel_err < 1e-5);
}

TEST_CASE("backward contracts") {
  auto x = make_tensor({2, 3}, 0.0, true);
  for (size_t i = 0; i < 6; ++i) x->values[i] = static_cast<double>(i);
  Tape tape;
  auto loss = sum_all(tape, x);
  tape.backward(loss);
  CHECK(x->grad == std::vector<double>(6, 1.0));
  // second backward without zeroing doubles leaf grads exactly
  tape.backward(loss);
  CHECK(x->grad == std::vector<double>(6, 2.0));

  Tape tape2;
  auto y = sum_all(tape2, x);
  auto z = add(tape2, y, y);
  (void)z;
  CHECK_THROWS_AS(tape2.backward(y), ContractError);  // not the terminal node
  Tape tape3;
  auto nonscalar = add(tape3, x, x);
  CHECK_THROWS_AS(tape3.backward(nonscalar), ContractError);
}

TEST_CASE("transpose_cn round trips") {
  Rng rng(2);
  auto x = make_tensor({2, 3, 4}, 0.0, true);
  fgtest::fill_random(x, rng);
  auto loss = [&]() {
    Tape tape;
    return weighted_sum(tape, transpose_cn(tape, x))->values[0];
  };
  {
    Tape tape;
    auto t = transpose_cn(tape, x);
    REQUIRE(t->shape == std::vector<int>{2, 4, 3});
    auto back = transpose_cn(tape, t);
    CHECK(back->values == x->values);
    tape.backward(weighted_sum(tape, transpose_cn(tape, x)));
  }
  CHECK(finite_diff_check({{"x", x}}, loss, 1e-5).max_rel_err < 1e-6);
}

TEST_CASE("pad, slice, concat gradients") {
  Rng rng(6);
  auto a = make_tensor({2, 3}, 0.0, true);
  auto b = make_tensor({2, 2}, 0.0, true);
  fgtest::fill_random(a, rng);
  fgtest::fill_random(b, rng);
  auto loss = [&]() {
    Tape tape;
    auto padded = zero_pad_last(tape, a, 5);
    auto sliced = slice_last(tape, padded, 4);
    return weighted_sum(tape, concat_last(tape, sliced, b))->values[0];
  };
  {
    Tape tape;
    auto padded = zero_pad_last(tape, a, 5);
    auto sliced = slice_last(tape, padded, 4);
    tape.backward(weighted_sum(tape, concat_last(tape, sliced, b)));
  }
  CHECK(finite_diff_check({{"a", a}, {"b", b}}, loss, 1e-5).max_rel_err < 1e-6);
}

TEST_CASE("forward primitives keep finite values on finite input") {
  Rng rng(101);
  Tape tape;
  auto x = make_tensor({4, 8});
  fgtest::fill_random(x, rng, -50, 50);
  auto sm = softmax_last(tape, x);
  CHECK(all_finite(*sm));
  auto gain = make_tensor({4}, 1.0);
  auto bias = make_tensor({4});
  CHECK(all_finite(*layer_norm(tape, x, gain, bias)));
}

// --- ParamStore / Adam / checkpoint ------------------------------------------

TEST_CASE("adam step moves parameters against the gradient") {
  ParamStore store;
  auto w = store.add_param("w", {3});
  w->values = {1.0, -2.0, 0.5};
  w->ensure_grad();
  w->grad = {0.2, -0.1, 0.0};
  AdamConfig cfg;
  store.adam_step(cfg);
  CHECK(w->values[0] < 1.0);
  CHECK(w->values[1] > -2.0);
  CHECK(w->values[2] == doctest::Approx(0.5));
}

TEST_CASE("checkpoint round trip preserves values to float32") {
  ParamStore store;
  auto w = store.add_param("layer.w", {2, 3});
  store.add_buffer("layer.running", {2}, 0.25);
  Rng rng(55);
  fgtest::fill_random(w, rng);
  std::string path = "build_test_ckpt.bin";
  store.save(path, "{\"format_version\":1}");

  ParamStore loaded;
  auto w2 = loaded.add_param("layer.w", {2, 3});
  auto buf2 = loaded.add_buffer("layer.running", {2});
  std::string header = loaded.load(path);
  CHECK(header.find("format_version") != std::string::npos);
  for (size_t i = 0; i < w->size(); ++i) {
    CHECK(w2->values[i] == static_cast<double>(static_cast<float>(w->values[i])));
  }
  CHECK(buf2->values[0] == 0.25);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint rejects shape mismatches") {
  ParamStore store;
  store.add_param("w", {2, 2});
  std::string path = "build_test_ckpt2.bin";
  store.save(path, "{}");
  ParamStore other;
  other.add_param("w", {2, 3});
  CHECK_THROWS(other.load(path));
  std::remove(path.c_str());
}
