// core/include/ufem/plot.hpp

// Copyright 2026  The ufem authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef UFEM_PLOT_HPP_
#define UFEM_PLOT_HPP_

#include <array>
#include <string>
#include <vector>

namespace ufem {

/// Minimal static chart emitters (PPM output). Enough for embedding
/// scatters, sparsity bars, and accuracy-vs-severity curves; not a plotting
/// library.
void plot_scatter(const std::string& path, const std::vector<std::array<double, 2>>& points,
                  const std::vector<int>& labels, int size = 480);

void plot_bars(const std::string& path, const std::vector<std::vector<double>>& series,
               int size = 480);

void plot_lines(const std::string& path, const std::vector<std::vector<double>>& series,
                int size = 480);

}  // namespace ufem

#endif  // UFEM_PLOT_HPP_
