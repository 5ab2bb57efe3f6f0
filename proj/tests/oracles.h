/* Copyright 2026 The rcfuse Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Independent reference implementations used as test oracles. They favor
// exhaustive enumeration over speed and share no code with the library.

#ifndef RCFUSE_TESTS_ORACLES_H_
#define RCFUSE_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

struct Rect {
  double x1, y1, x2, y2;
};

// IoU by counting sample points on a grid of pitch `step`.
inline double RasterIou(const Rect& a, const Rect& b, double step) {
  const double x0 = std::min(a.x1, b.x1), x1 = std::max(a.x2, b.x2);
  const double y0 = std::min(a.y1, b.y1), y1 = std::max(a.y2, b.y2);
  long in_a = 0, in_b = 0, both = 0;
  for (double y = y0 + step / 2; y < y1; y += step) {
    const bool ya = y >= a.y1 && y < a.y2;
    const bool yb = y >= b.y1 && y < b.y2;
    if (!ya && !yb) continue;
    for (double x = x0 + step / 2; x < x1; x += step) {
      const bool pa = ya && x >= a.x1 && x < a.x2;
      const bool pb = yb && x >= b.x1 && x < b.x2;
      in_a += pa;
      in_b += pb;
      both += pa && pb;
    }
  }
  const long uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

inline double ExactIou(const Rect& a, const Rect& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni <= 0 ? 0.0 : inter / uni;
}

// Greedy NMS by exhaustive search: the kept set is the unique subset S of
// rank-ordered boxes with  i in S  <=>  no j in S ranked before i has
// IoU(i, j) >= thr. Returns kept indices (in rank order) and the number of
// subsets that satisfied the condition (1 when the characterization holds).
struct NmsOracleResult {
  std::vector<std::size_t> kept;
  int solutions = 0;
};

inline NmsOracleResult BruteForceNms(const std::vector<Rect>& ranked, double thr) {
  const std::size_t n = ranked.size();
  NmsOracleResult out;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      bool suppressed = false;
      for (std::size_t j = 0; j < i; ++j) {
        if ((mask >> j & 1u) && ExactIou(ranked[i], ranked[j]) >= thr) suppressed = true;
      }
      const bool in = mask >> i & 1u;
      if (in == suppressed) ok = false;
    }
    if (!ok) continue;
    ++out.solutions;
    out.kept.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1u) out.kept.push_back(i);
    }
  }
  return out;
}

// 101-point interpolated AP straight from the definition: for each recall
// level r = k/100, the best precision over every ranking cut-off whose recall
// reaches r.
inline double BruteForceAp(const std::vector<bool>& flags, std::size_t num_gt) {
  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    double best = 0.0;
    for (std::size_t cut = 1; cut <= flags.size(); ++cut) {
      std::size_t tp = 0;
      for (std::size_t i = 0; i < cut; ++i) tp += flags[i];
      const double recall = static_cast<double>(tp) / static_cast<double>(num_gt);
      const double precision = static_cast<double>(tp) / static_cast<double>(cut);
      if (recall >= r - 1e-12) best = std::max(best, precision);
    }
    sum += best;
  }
  return sum / 101.0;
}

// Area under the step precision-recall curve with the precision envelope,
// integrated piecewise between observed recall values.
inline double TrapezoidEnvelopeAp(const std::vector<bool>& flags, std::size_t num_gt) {
  std::vector<double> rec, prec;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    tp += flags[i];
    rec.push_back(static_cast<double>(tp) / num_gt);
    prec.push_back(static_cast<double>(tp) / (i + 1));
  }
  for (std::size_t i = prec.size(); i-- > 1;) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double area = 0.0, last = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    area += (rec[i] - last) * prec[i];
    last = rec[i];
  }
  return area;
}

}  // namespace oracle

#endif  // RCFUSE_TESTS_ORACLES_H_
