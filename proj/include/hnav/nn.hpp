#ifndef HNAV_NN_HPP
#define HNAV_NN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hnav/common.hpp"

namespace hnav::nn {

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
void init_uniform(Mat& m, Eigen::Index fan_in, Rng& rng);

/// Row-wise softmax with max subtraction.
Mat row_softmax(const Mat& logits);

/// Softmax backward for row-wise softmax output `s` and upstream gradient `ds`.
Mat row_softmax_backward(const Mat& s, const Mat& ds);

inline Mat tanh(const Mat& x) { return x.array().tanh().matrix(); }

/// Adds a 1 x n bias row to every row of x.
inline Mat add_bias(const Mat& x, const Mat& bias) {
  return x + Mat::Ones(x.rows(), 1) * bias;
}

inline Mat col_sum(const Mat& x) { return x.colwise().sum(); }

bool all_finite(const std::vector<const Mat*>& tensors);

/// Adam over a fixed list of tensors.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Mat> m_, v_;
};

/// Parameter file: 8-byte magic "HNAVPRM\0", then little-endian uint32
/// version, uint32 kind, uint32 n_dims, int32 dims[n_dims], uint32 n_tensors,
/// and per tensor uint32 rows, uint32 cols, float64[rows*cols] row-major.
struct TensorFile {
  std::uint32_t kind = 0;
  std::vector<std::int32_t> dims;
  std::vector<Mat> tensors;
};

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint32_t kKindCoopNet = 1;
inline constexpr std::uint32_t kKindPolicy = 2;

void write_tensor_file(const std::string& path, const TensorFile& file);
TensorFile read_tensor_file(const std::string& path);
std::string encode_tensor_file(const TensorFile& file);
TensorFile decode_tensor_file(const std::string& bytes);

}  // namespace hnav::nn

#endif  // HNAV_NN_HPP
