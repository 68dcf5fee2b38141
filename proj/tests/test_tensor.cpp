#include <doctest.h>

#include "qgraph/quant.hpp"
#include "qgraph/rng.hpp"
#include "test_util.hpp"

using namespace qgraph;

TEST_CASE("compute_scale derives the documented params") {
  QuantParams u8 = compute_scale(-1.0, 1.0, DType::U8);
  CHECK(u8.scale == 127.5);
  CHECK(u8.zero_offset == -1.0);

  QuantParams s8 = compute_scale(-1.0, 1.0, DType::S8);
  CHECK(s8.scale == 127.0);
  CHECK(s8.zero_offset == 0.0);
}

TEST_CASE("compute_scale rejects bad ranges") {
  CHECK_FAILS_WITH(Errc::DegenerateRange, compute_scale(0.0, 0.0, DType::U8));
  CHECK_FAILS_WITH(Errc::DegenerateRange, compute_scale(1.0, -1.0, DType::U8));
  CHECK_FAILS_WITH(Errc::AsymmetricSignedRange, compute_scale(-0.5, 1.0, DType::S8));
}

TEST_CASE("quantize saturates and rounds half away from zero") {
  QuantParams u8 = compute_scale(-1.0, 1.0, DType::U8);
  Tensor q = quantize(Tensor::f32({3}, {0.5f, 5.0f, -5.0f}), u8);
  CHECK(q.u8()[0] == 191);  // round(1.5 * 127.5) = round(191.25)
  CHECK(q.u8()[1] == 255);
  CHECK(q.u8()[2] == 0);

  QuantParams s8 = compute_scale(-1.0, 1.0, DType::S8);
  Tensor qs = quantize(Tensor::f32({3}, {0.0f, 5.0f, -5.0f}), s8);
  CHECK(qs.s8()[0] == 0);  // symmetric params keep zero exact
  CHECK(qs.s8()[1] == 127);
  CHECK(qs.s8()[2] == -127);
}

TEST_CASE("dequantize inverts the scalar map") {
  QuantParams u8 = compute_scale(-1.0, 1.0, DType::U8);
  Tensor d = dequantize(Tensor::u8({1}, {191}), u8);
  float want = static_cast<float>(191.0 / 127.5 - 1.0);
  CHECK(d.f32()[0] == want);  // ~0.49804
  CHECK(d.f32()[0] == doctest::Approx(0.49804).epsilon(1e-4));
}

TEST_CASE("round-trip error is bounded by half a quantization step") {
  Rng rng(11);
  QuantParams u8 = compute_scale(-0.7, 1.3, DType::U8);
  QuantParams s8 = compute_scale(-1.0, 1.0, DType::S8);
  for (int i = 0; i < 10000; ++i) {
    double xu = rng.uniform(-0.7, 1.3);
    double du = dequantize_value(static_cast<double>(quantize_value(xu, u8)), u8);
    CHECK(std::abs(du - xu) <= 0.5 / u8.scale);
    double xs = rng.uniform(-1.0, 1.0);
    double ds = dequantize_value(static_cast<double>(quantize_value(xs, s8)), s8);
    CHECK(std::abs(ds - xs) <= 0.5 / s8.scale);
  }
}

TEST_CASE("tensor round-trip stays within a step plus F32 representation") {
  Rng rng(12);
  QuantParams p = compute_scale(-1.0, 1.0, DType::U8);
  std::vector<float> xs(4096);
  for (float& x : xs) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  Tensor t = Tensor::f32({4096}, xs);
  Tensor rt = dequantize(quantize(t, p), p);
  double bound = 0.5 / p.scale;
  for (size_t i = 0; i < xs.size(); ++i) {
    double err = std::abs(static_cast<double>(rt.f32()[i]) - static_cast<double>(xs[i]));
    CHECK(err <= bound * (1.0 + 1e-6));
  }
}

TEST_CASE("quantize is monotone") {
  Rng rng(13);
  QuantParams p = compute_scale(-2.0, 2.0, DType::U8);
  std::vector<double> xs(512);
  for (double& x : xs) x = rng.uniform(-2.5, 2.5);
  std::sort(xs.begin(), xs.end());
  int64_t prev = -1;
  for (double x : xs) {
    int64_t q = quantize_value(x, p);
    CHECK(q >= prev);
    prev = q;
  }
}

TEST_CASE("requantize maps accumulators onto a fresh U8 range") {
  Tensor v = Tensor::s32({1}, {1000});
  auto [q1, p1] = requantize(v, 1000.0, 0.0, 2.0);
  CHECK(q1.u8()[0] == 128);  // 1.0 * 127.5 rounds away from zero
  CHECK(p1.scale == 127.5);

  auto [q2, p2] = requantize(Tensor::s32({1}, {0}), 5.0, -1.0, 1.0);
  (void)p2;
  CHECK(q2.u8()[0] == 128);  // offset -1 maps 0.0 to round(127.5)

  auto [q3, p3] = requantize(Tensor::s32({1}, {1000000000}), 1.0, 0.0, 2.0);
  (void)p3;
  CHECK(q3.u8()[0] == 255);  // out of range saturates
}

TEST_CASE("requantization_range widens to include zero") {
  auto [a, b] = requantization_range(Tensor::s32({2}, {-5, 10}), 5.0);
  CHECK(a == -1.0);
  CHECK(b == 2.0);
  auto [c, d] = requantization_range(Tensor::s32({2}, {3, 7}), 1.0);
  CHECK(c == 0.0);
  CHECK(d == 7.0);
  auto [e, f] = requantization_range(Tensor::s32({1}, {0}), 1.0);
  CHECK(e == 0.0);
  CHECK(f == 0.0);  // degenerate; consumers must widen before use
  CHECK_FAILS_WITH(Errc::DegenerateRange, compute_scale(e, f, DType::U8));
}

TEST_CASE("requantization_range rejects empty input") {
  CHECK_FAILS_WITH(Errc::EmptyTensor, requantization_range(Tensor::s32({0}, {}), 1.0));
}

TEST_CASE("tensor equality is bitwise") {
  Tensor a = Tensor::f32({2}, {1.0f, -0.0f});
  Tensor b = Tensor::f32({2}, {1.0f, 0.0f});
  CHECK(a != b);  // -0.0 and 0.0 differ bitwise
  CHECK(a == Tensor::f32({2}, {1.0f, -0.0f}));
  CHECK(Tensor::f32({2, 1}, {1.0f, 2.0f}) != Tensor::f32({2}, {1.0f, 2.0f}));
}

TEST_CASE("shape bookkeeping") {
  CHECK(Tensor::scalar(3.0f).numel() == 1);
  CHECK(Tensor::zeros(DType::S32, {2, 3}).numel() == 6);
  CHECK_FAILS_WITH(Errc::ShapeMismatch, Tensor::f32({2, 2}, {1.0f}));
  CHECK_FAILS_WITH(Errc::ShapeMismatch, Tensor::f32({2}, {1.0f, 2.0f}).s8());
}
