#include "wingen/dense_array.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace wingen {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

DenseArray::DenseArray(Shape shape, Precision p)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0), precision_(p) {}

DenseArray::DenseArray(Shape shape, std::vector<double> data, Precision p)
    : shape_(std::move(shape)), data_(std::move(data)), precision_(p) {
    if (shape_numel(shape_) != data_.size())
        throw ShapeError("shape " + shape_str(shape_) + " does not match data length " +
                         std::to_string(data_.size()));
    normalize();
}

DenseArray DenseArray::full(Shape shape, double v, Precision p) {
    DenseArray a(std::move(shape), p);
    std::fill(a.data_.begin(), a.data_.end(), round_to(p, v));
    return a;
}

DenseArray DenseArray::matrix(std::initializer_list<std::initializer_list<double>> rows, Precision p) {
    std::size_t r = rows.size();
    std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged matrix literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return DenseArray({r, c}, std::move(data), p);
}

DenseArray DenseArray::reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size())
        throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    DenseArray out = *this;
    out.shape_ = std::move(shape);
    return out;
}

DenseArray DenseArray::cast(Precision p) const {
    DenseArray out = *this;
    out.precision_ = p;
    out.normalize();
    return out;
}

void DenseArray::normalize() {
    if (precision_ == Precision::single)
        for (auto& v : data_) v = static_cast<double>(static_cast<float>(v));
}

DenseArray matmul(const DenseArray& a, const DenseArray& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
    std::vector<double> out(n * m, 0.0);
    auto A = a.data();
    auto B = b.data();
    for (std::size_t i = 0; i < n; ++i) {
        double* o = out.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = A[i * k + p];
            if (av == 0.0) continue;
            const double* br = B.data() + p * m;
            for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
        }
    }
    return DenseArray({n, m}, std::move(out), common_precision(a.precision(), b.precision()));
}

DenseArray transpose(const DenseArray& a) {
    if (a.rank() != 2) throw ShapeError("transpose needs a matrix, got " + shape_str(a.shape()));
    const std::size_t n = a.dim(0), m = a.dim(1);
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[j * n + i] = a[i * m + j];
    return DenseArray({m, n}, std::move(out), a.precision());
}

DenseArray softmax_rows(const DenseArray& a) {
    if (a.rank() == 0 || a.shape().back() == 0)
        throw ShapeError("softmax_rows needs a non-empty last axis, got " + shape_str(a.shape()));
    const std::size_t cols = a.shape().back();
    const std::size_t rows = a.size() / cols;
    std::vector<double> out(a.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = a.data().data() + r * cols;
        double* y = out.data() + r * cols;
        const double mx = *std::max_element(x, x + cols);
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        for (std::size_t j = 0; j < cols; ++j) y[j] /= sum;
    }
    return DenseArray(a.shape(), std::move(out), a.precision());
}

namespace {
void require_same(const DenseArray& a, const DenseArray& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + " shape mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}
}  // namespace

DenseArray add(const DenseArray& a, const DenseArray& b) {
    require_same(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return DenseArray(a.shape(), std::move(out), common_precision(a.precision(), b.precision()));
}

DenseArray sub(const DenseArray& a, const DenseArray& b) {
    require_same(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return DenseArray(a.shape(), std::move(out), common_precision(a.precision(), b.precision()));
}

DenseArray scaled(const DenseArray& a, double s) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * s;
    return DenseArray(a.shape(), std::move(out), a.precision());
}

double max_abs_diff(const DenseArray& a, const DenseArray& b) {
    require_same(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double sum_squares(const DenseArray& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return s;
}

bool all_finite(const DenseArray& a) {
    return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace wingen
