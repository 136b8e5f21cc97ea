#pragma once

// Brute-force recomputations of the loss terms with plain loops in double precision. They
// share no code with the autograd ops and serve as independent oracles.

#include <cmath>
#include <vector>

#include "mustgan/losses.hpp"

namespace mustgan::oracle {

using Map = std::vector<std::vector<std::vector<double>>>;  // [c][y][x]

inline Map to_map(const Tensor<double>& t) {
  Map m(static_cast<std::size_t>(t.channels()),
        std::vector<std::vector<double>>(static_cast<std::size_t>(t.height()), std::vector<double>(static_cast<std::size_t>(t.width()))));
  for (int c = 0; c < t.channels(); ++c)
    for (int y = 0; y < t.height(); ++y)
      for (int x = 0; x < t.width(); ++x) m[c][y][x] = t.at(c, y, x);
  return m;
}

inline double mean_abs(const Map& a, const Map& b) {
  double acc = 0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < a.size(); ++c)
    for (std::size_t y = 0; y < a[c].size(); ++y)
      for (std::size_t x = 0; x < a[c][y].size(); ++x, ++n) acc += std::fabs(a[c][y][x] - b[c][y][x]);
  return acc / static_cast<double>(n);
}

inline std::vector<std::vector<double>> gram(const Map& f) {
  const std::size_t c = f.size(), h = f[0].size(), w = f[0][0].size();
  std::vector<std::vector<double>> g(c, std::vector<double>(c, 0.0));
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) acc += f[i][y][x] * f[j][y][x];
      g[i][j] = acc / static_cast<double>(c * h * w);
    }
  return g;
}

inline double gram_mean_abs(const Map& a, const Map& b) {
  const auto ga = gram(a), gb = gram(b);
  double acc = 0;
  for (std::size_t i = 0; i < ga.size(); ++i)
    for (std::size_t j = 0; j < ga.size(); ++j) acc += std::fabs(ga[i][j] - gb[i][j]);
  return acc / static_cast<double>(ga.size() * ga.size());
}

// 3x3 convolution, zero padding 1, then relu.
inline Map conv3_relu(const Map& in, const Tensor<double>& weight, const Tensor<double>& bias) {
  const int cout = weight.channels(), cin = weight.height();
  const int h = static_cast<int>(in[0].size()), w = static_cast<int>(in[0][0].size());
  Map out(static_cast<std::size_t>(cout), std::vector<std::vector<double>>(static_cast<std::size_t>(h), std::vector<double>(static_cast<std::size_t>(w))));
  for (int o = 0; o < cout; ++o)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = bias[static_cast<std::size_t>(o)];
        for (int c = 0; c < cin; ++c)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = y + dy, xx = x + dx;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
              acc += weight.at(o, c, (dy + 1) * 3 + (dx + 1)) * in[c][yy][xx];
            }
        out[o][y][x] = acc > 0 ? acc : 0.0;
      }
  return out;
}

inline Map pool2(const Map& in) {
  Map out(in.size(), std::vector<std::vector<double>>(in[0].size() / 2, std::vector<double>(in[0][0].size() / 2)));
  for (std::size_t c = 0; c < in.size(); ++c)
    for (std::size_t y = 0; y < out[c].size(); ++y)
      for (std::size_t x = 0; x < out[c][y].size(); ++x)
        out[c][y][x] = (in[c][2 * y][2 * x] + in[c][2 * y][2 * x + 1] + in[c][2 * y + 1][2 * x] + in[c][2 * y + 1][2 * x + 1]) / 4;
  return out;
}

inline std::vector<Map> phi(const PerceptualExtractor<double>& ex, const Tensor<double>& image) {
  const auto& entries = ex.params().entries();
  std::vector<Map> taps;
  Map x = to_map(image);
  for (int i = 0; i < ex.taps(); ++i) {
    if (i > 0) x = pool2(x);
    x = conv3_relu(x, entries[static_cast<std::size_t>(2 * i)].second->value, entries[static_cast<std::size_t>(2 * i + 1)].second->value);
    taps.push_back(x);
  }
  return taps;
}

inline double perceptual(const PerceptualExtractor<double>& ex, const Tensor<double>& a, const Tensor<double>& b) {
  const int l = ex.options().perceptual_layer - 1;
  return mean_abs(phi(ex, a)[static_cast<std::size_t>(l)], phi(ex, b)[static_cast<std::size_t>(l)]);
}

inline double style(const PerceptualExtractor<double>& ex, const Tensor<double>& a, const Tensor<double>& b) {
  const auto fa = phi(ex, a), fb = phi(ex, b);
  double acc = 0;
  for (std::size_t i = 0; i < fa.size(); ++i) acc += gram_mean_abs(fa[i], fb[i]);
  return acc;
}

inline double lsgan_d(double real, double fake) { return 0.5 * ((real - 1) * (real - 1) + fake * fake); }
inline double lsgan_g(double fake) { return (fake - 1) * (fake - 1); }

}  // namespace mustgan::oracle
