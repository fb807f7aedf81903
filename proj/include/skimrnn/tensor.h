// Copyright 2026 The Skim-RNN Authors.
//
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

#ifndef SKIMRNN_TENSOR_H_
#define SKIMRNN_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace skimrnn {

using Shape = std::vector<size_t>;

std::string ShapeToString(const Shape &shape);
size_t ShapeSize(const Shape &shape);

// Dense row-major array of doubles with an optional gradient buffer of the
// same shape. Rank 0 (scalar), 1 (vector) and 2 (matrix) are used.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Scalar(double value) { return Tensor(Shape{}, {value}); }
  static Tensor Vector(std::vector<double> values);
  static Tensor Matrix(size_t rows, size_t cols, std::vector<double> values);

  const Shape &shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  size_t rows() const { return shape_.empty() ? 1 : shape_[0]; }
  size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double> &values() const { return data_; }

  double &operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }
  double &at(size_t r, size_t c) { return data_[r * cols() + c]; }
  double at(size_t r, size_t c) const { return data_[r * cols() + c]; }

  // Gradient slot. Allocated (zero-filled) on first EnableGrad().
  bool has_grad() const { return has_grad_; }
  void EnableGrad();
  void ZeroGrad();
  std::span<double> grad() { return grad_; }
  std::span<const double> grad() const { return grad_; }

  void Fill(double value);
  std::string ShapeString() const { return ShapeToString(shape_); }

  friend bool operator==(const Tensor &a, const Tensor &b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
  bool has_grad_ = false;
};

}  // namespace skimrnn

#endif  // SKIMRNN_TENSOR_H_
