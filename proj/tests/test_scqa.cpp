#include <algorithm>

#include "doctest.h"
#include "sgsr/error.hpp"
#include "sgsr/ops.hpp"
#include "sgsr/scqa.hpp"
#include "support.hpp"

using namespace sgsr;
using namespace sgsr::test;

TEST_CASE("spatial_split") {
  Rng rng(41);
  SUBCASE("constant map has zero structure") {
    const SpatialSplit s = spatial_split(Tensor({3, 16, 16}, 0.5), 4, 4);
    for (double v : s.appearance.data()) CHECK(v == 0.5);
    for (double v : s.structure.data()) CHECK(v == 0.0);
    const SpatialSplit r = spatial_split(Tensor({2, 8, 8}, 0.3), 2, 2);
    CHECK(max_abs(r.structure) < 1e-15);
  }
  SUBCASE("pooled size equal to the input is the identity split") {
    const Tensor x = rand_tensor({2, 16, 16}, rng);
    const SpatialSplit s = spatial_split(x, 16, 16);
    CHECK(max_abs_diff(s.appearance, x) == 0.0);
    CHECK(max_abs(s.structure) == 0.0);
  }
  SUBCASE("bilinear upsample of a pooled map is not a fixed point of the split") {
    // area_down(bilinear_up(p)) smooths p with a [1/8, 3/4, 1/8] kernel per axis, so the
    // residual of an upsampled random map is small but not zero; record its size.
    const Tensor p = rand_tensor({1, 16, 16}, rng);
    const Tensor x = resample(p, 64, 64, ResampleMode::BilinearUp);
    const SpatialSplit s = spatial_split(x, 16, 16);
    const double residual = max_abs(s.structure);
    MESSAGE("structure residual of an upsampled random 16x16 map: " << residual);
    CHECK(residual > 1e-6);
    CHECK(residual < max_abs(x));
    // a smooth (low-frequency) pooled map is much closer to a fixed point
    Tensor smooth({1, 16, 16});
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t c = 0; c < 16; ++c)
        smooth.data()[y * 16 + c] = std::sin(0.2 * double(y)) * std::cos(0.15 * double(c));
    const SpatialSplit t = spatial_split(resample(smooth, 64, 64, ResampleMode::BilinearUp), 16, 16);
    CHECK(max_abs(t.structure) < 0.05 * residual + 0.05);
  }
  SUBCASE("single bright pixel") {
    Tensor x({1, 8, 8});
    x.data()[2 * 8 + 5] = 1.0;
    const SpatialSplit s = spatial_split(x, 2, 2);
    CHECK(s.appearance.data()[0 * 2 + 1] == 1.0 / 16.0);
    CHECK(s.appearance.data()[0] == 0.0);
    CHECK(s.appearance.data()[2] == 0.0);
    CHECK(s.appearance.data()[3] == 0.0);
    const Tensor rebuilt = add(s.structure, resample(s.appearance, 8, 8, ResampleMode::BilinearUp));
    CHECK(max_abs_diff(rebuilt, x) < 1e-15);
  }
  SUBCASE("reconstruction identity on random maps") {
    for (int trial = 0; trial < 10; ++trial) {
      const Tensor x = rand_tensor({3, 32, 32}, rng);
      const SpatialSplit s = spatial_split(x, 8, 8);
      CHECK(s.structure.shape() == x.shape());
      CHECK(s.appearance.shape() == Shape{3, 8, 8});
      const Tensor rebuilt = add(s.structure, resample(s.appearance, 32, 32, ResampleMode::BilinearUp));
      CHECK(max_abs_diff(rebuilt, x) < 1e-12);
    }
  }
  SUBCASE("pooled larger than the input") {
    CHECK_THROWS_AS(spatial_split(Tensor({1, 8, 8}), 16, 16), ConfigError);
    CHECK_THROWS_AS(spatial_split(Tensor({1, 8, 8}), 3, 3), ConfigError);
  }
}

TEST_CASE("pooled extent per level") {
  CHECK(pooled_extent(16, 0, 64) == 16);
  CHECK(pooled_extent(16, 1, 32) == 8);
  CHECK(pooled_extent(16, 2, 16) == 4);
  CHECK(pooled_extent(16, 3, 8) == 4);
  CHECK(pooled_extent(16, 0, 8) == 8);
  CHECK(pooled_extent(16, 4, 2) == 2);
}

namespace {
ScqaParams swapped(const ScqaParams& p) {
  ParamStore store(0);
  ScqaParams q = ScqaParams::make(store, "swap", p.cqa.width, p.pooled_h, p.pooled_w);
  const std::size_t d = p.cqa.width;
  // co-query input rows [lr | ref] -> [ref | lr]
  for (std::size_t r = 0; r < 2 * d; ++r)
    for (std::size_t c = 0; c < d; ++c)
      q.cqa.coquery.weight.data()[r * d + c] = p.cqa.coquery.weight.data()[((r + d) % (2 * d)) * d + c];
  std::copy(p.cqa.coquery.bias.data().begin(), p.cqa.coquery.bias.data().end(), q.cqa.coquery.bias.data().begin());
  for (std::size_t k = 0; k < 2; ++k) {
    q.cqa.key[k] = p.cqa.key[1 - k];
    q.cqa.value[k] = p.cqa.value[1 - k];
  }
  return q;
}
}  // namespace

TEST_CASE("scqa_forward") {
  Rng rng(42);
  SUBCASE("swapping contrasts and their params swaps the outputs") {
    ParamStore store(1);
    const ScqaParams p = ScqaParams::make(store, "scqa", 4, 4, 4);
    const Tensor a = rand_tensor({4, 16, 16}, rng), b = rand_tensor({4, 16, 16}, rng);
    const auto o1 = scqa_forward(a, b, p);
    const auto o2 = scqa_forward(b, a, swapped(p));
    CHECK(max_abs_diff(o1[0], o2[1]) < 1e-12);
    CHECK(max_abs_diff(o1[1], o2[0]) < 1e-12);
  }
  SUBCASE("outputs lie in the envelope of the appearance tokens") {
    const std::size_t d = 3;
    ParamStore store(2);
    ScqaParams p = ScqaParams::make(store, "scqa", d, 8, 8);
    for (auto* t : {&p.cqa.key[0].weight, &p.cqa.key[1].weight, &p.cqa.value[0].weight, &p.cqa.value[1].weight}) {
      std::fill(t->data().begin(), t->data().end(), 0.0);
      for (std::size_t i = 0; i < d; ++i) t->data()[i * d + i] = 1.0;
    }
    for (auto* t : {&p.cqa.key[0].bias, &p.cqa.key[1].bias, &p.cqa.value[0].bias, &p.cqa.value[1].bias})
      std::fill(t->data().begin(), t->data().end(), 0.0);
    const Tensor a = rand_tensor({d, 8, 8}, rng), b = rand_tensor({d, 8, 8}, rng);
    const auto out = scqa_forward(a, b, p);
    const std::array<const Tensor*, 2> src{&a, &b};
    for (std::size_t k = 0; k < 2; ++k) {
      const Tensor app = spatial_split(*src[k], 8, 8).appearance;
      for (std::size_t c = 0; c < d; ++c) {
        const auto plane = app.data().subspan(c * 64, 64);
        const double lo = *std::min_element(plane.begin(), plane.end());
        const double hi = *std::max_element(plane.begin(), plane.end());
        for (double v : out[k].data().subspan(c * 64, 64)) CHECK((v >= lo - 1e-12 && v <= hi + 1e-12));
      }
    }
  }
  SUBCASE("composition oracle 16x16 d=8 pooled 4") {
    ParamStore store(3);
    const ScqaParams p = ScqaParams::make(store, "scqa", 8, 4, 4);
    const Tensor a = rand_tensor({8, 16, 16}, rng), b = rand_tensor({8, 16, 16}, rng);
    const auto out = scqa_forward(a, b, p);
    // split via explicit block means and bilinear weights, attention by brute force
    auto block_mean = [](const Tensor& x) {
      Tensor m({8, 4, 4});
      for (std::size_t c = 0; c < 8; ++c)
        for (std::size_t i = 0; i < 16; ++i)
          for (std::size_t j = 0; j < 16; ++j) m.data()[(c * 4 + i / 4) * 4 + j / 4] += x.data()[(c * 16 + i) * 16 + j] / 16.0;
      return m;
    };
    auto bilinear = [](const Tensor& m) {
      Tensor u({8, 16, 16});
      auto src = [](std::size_t o) { return std::max(0.0, (double(o) + 0.5) / 4.0 - 0.5); };
      for (std::size_t c = 0; c < 8; ++c)
        for (std::size_t i = 0; i < 16; ++i)
          for (std::size_t j = 0; j < 16; ++j) {
            const double sy = src(i), sx = src(j);
            const std::size_t y0 = std::size_t(sy), x0 = std::size_t(sx);
            const std::size_t y1 = std::min<std::size_t>(y0 + 1, 3), x1 = std::min<std::size_t>(x0 + 1, 3);
            const double fy = sy - double(y0), fx = sx - double(x0);
            auto at = [&](std::size_t y, std::size_t x) { return m.data()[(c * 4 + y) * 4 + x]; };
            u.data()[(c * 16 + i) * 16 + j] = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
                                              fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
          }
      return u;
    };
    auto tokens = [](const Tensor& x, std::size_t hw) {
      Mat t(hw, std::vector<double>(8));
      for (std::size_t c = 0; c < 8; ++c)
        for (std::size_t i = 0; i < hw; ++i) t[i][c] = x.data()[c * hw + i];
      return t;
    };
    CqaInput in;
    const std::array<const Tensor*, 2> src{&a, &b};
    for (std::size_t k = 0; k < 2; ++k) {
      const Tensor app = block_mean(*src[k]);
      const Tensor up = bilinear(app);
      Tensor st({8, 16, 16});
      for (std::size_t i = 0; i < st.numel(); ++i) st.data()[i] = src[k]->data()[i] - up.data()[i];
      Mat ts = tokens(st, 256), ta = tokens(app, 16);
      Tensor ts_t({256, 8}), ta_t({16, 8});
      for (std::size_t i = 0; i < 256; ++i)
        for (std::size_t c = 0; c < 8; ++c) ts_t.data()[i * 8 + c] = ts[i][c];
      for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t c = 0; c < 8; ++c) ta_t.data()[i * 8 + c] = ta[i][c];
      in.structural[k] = ts_t;
      in.appearance[k] = ta_t;
    }
    const auto ref = brute_cqa(in, p.cqa);
    for (std::size_t k = 0; k < 2; ++k) {
      double err = 0.0;
      for (std::size_t i = 0; i < 256; ++i)
        for (std::size_t c = 0; c < 8; ++c) err = std::max(err, std::abs(ref[k][i][c] - out[k].data()[c * 256 + i]));
      CHECK(err < 1e-10);
    }
  }
  SUBCASE("gradient check end to end") {
    ParamStore store(4);
    const ScqaParams p = ScqaParams::make(store, "scqa", 2, 2, 2);
    const Tensor a = rand_tensor({2, 4, 4}, rng, -1, 1, true), b = rand_tensor({2, 4, 4}, rng, -1, 1, true);
    const Tensor w0 = rand_tensor({2, 4, 4}, rng), w1 = rand_tensor({2, 4, 4}, rng);
    auto loss = [&] {
      const auto o = scqa_forward(a, b, p);
      return add(sum(mul(o[0], w0)), sum(mul(o[1], w1)));
    };
    std::vector<Tensor> all = store.tensors();
    all.push_back(a);
    all.push_back(b);
    CHECK(grad_check(loss, all).max_relative_error < 1e-4);
  }
  SUBCASE("shape mismatch between contrasts") {
    ParamStore store(5);
    const ScqaParams p = ScqaParams::make(store, "scqa", 2, 2, 2);
    CHECK_THROWS_AS(scqa_forward(Tensor({2, 4, 4}), Tensor({2, 8, 8}), p), ShapeError);
  }
}
