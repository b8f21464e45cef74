#include "uq/tensor.hpp"

#include <sstream>

#include "uq/error.hpp"

namespace uq {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw Error(ErrorKind::shape, "tensor shape must have at least one dimension");
  for (auto e : shape) {
    if (e == 0) throw Error(ErrorKind::shape, "tensor extent of 0 in shape " + shape_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != element_count(shape_)) {
    throw Error(ErrorKind::shape, "tensor data length " + std::to_string(data_.size()) +
                                      " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::vector(std::vector<double> values) {
  const auto n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorKind::shape, "elementwise shape mismatch: " + shape_string(a.shape()) +
                                      " vs " + shape_string(b.shape()));
  }
  Tensor out(a.shape());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  switch (op) {
    case BinaryOp::add:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
      break;
    case BinaryOp::sub:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
      break;
    case BinaryOp::mul:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
      break;
  }
  return out;
}

Tensor elementwise(UnaryOp op, const Tensor& a) {
  Tensor out(a.shape());
  auto o = out.data();
  auto x = a.data();
  switch (op) {
    case UnaryOp::square:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * x[i];
      break;
  }
  return out;
}

}  // namespace uq
