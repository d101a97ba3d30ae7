#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wingen {

using Shape = std::vector<std::size_t>;

enum class Precision { single, double_ };

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

// Values are kept as binary64; single-precision arrays hold only values that are
// exactly representable in binary32 (every producer rounds through float).
inline double round_to(Precision p, double x) {
    return p == Precision::single ? static_cast<double>(static_cast<float>(x)) : x;
}

inline Precision common_precision(Precision a, Precision b) {
    return (a == Precision::single || b == Precision::single) ? Precision::single : Precision::double_;
}

class DenseArray {
public:
    DenseArray() = default;
    explicit DenseArray(Shape shape, Precision p = Precision::single);
    DenseArray(Shape shape, std::vector<double> data, Precision p = Precision::single);

    static DenseArray full(Shape shape, double v, Precision p = Precision::single);
    static DenseArray matrix(std::initializer_list<std::initializer_list<double>> rows,
                             Precision p = Precision::double_);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    Precision precision() const { return precision_; }

    std::span<const double> data() const { return data_; }
    // Writes must be followed by normalize() when precision is single.
    std::span<double> mutable_data() { return data_; }
    std::vector<double>&& release() && { return std::move(data_); }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }

    DenseArray reshaped(Shape shape) const;
    DenseArray cast(Precision p) const;
    void normalize();

    bool operator==(const DenseArray& o) const { return shape_ == o.shape_ && data_ == o.data_; }

private:
    Shape shape_;
    std::vector<double> data_;
    Precision precision_ = Precision::single;
};

DenseArray matmul(const DenseArray& a, const DenseArray& b);
DenseArray transpose(const DenseArray& a);
DenseArray softmax_rows(const DenseArray& a);
DenseArray add(const DenseArray& a, const DenseArray& b);
DenseArray sub(const DenseArray& a, const DenseArray& b);
DenseArray scaled(const DenseArray& a, double s);
double max_abs_diff(const DenseArray& a, const DenseArray& b);
double sum_squares(const DenseArray& a);
bool all_finite(const DenseArray& a);

}  // namespace wingen
