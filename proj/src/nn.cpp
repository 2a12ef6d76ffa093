#include "hnav/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <type_traits>

namespace hnav::nn {

void init_uniform(Mat& m, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-bound, bound);
}

Mat row_softmax(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - mx).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

Mat row_softmax_backward(const Mat& s, const Mat& ds) {
  const Eigen::VectorXd inner = (s.array() * ds.array()).rowwise().sum();
  return (s.array() * (ds.colwise() - inner).array()).matrix();
}

bool all_finite(const std::vector<const Mat*>& tensors) {
  for (const Mat* t : tensors)
    if (!t->allFinite()) return false;
  return true;
}

void Adam::step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads) {
  if (m_.empty()) {
    for (const Mat* p : params) {
      m_.push_back(Mat::Zero(p->rows(), p->cols()));
      v_.push_back(Mat::Zero(p->rows(), p->cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * *grads[k];
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grads[k]->cwiseAbs2();
    params[k]->array() -=
        lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps_);
  }
}

namespace {

constexpr char kMagic[8] = {'H', 'N', 'A', 'V', 'P', 'R', 'M', '\0'};

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits;
  std::memcpy(&bits, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  if (pos + sizeof(T) > in.size()) throw FormatError("parameter file truncated");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bits |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(T);
  T value;
  std::memcpy(&value, &bits, sizeof(T));
  return value;
}

}  // namespace

std::string encode_tensor_file(const TensorFile& file) {
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint32_t>(out, file.kind);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(file.dims.size()));
  for (auto d : file.dims) put_le<std::int32_t>(out, d);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(file.tensors.size()));
  for (const Mat& t : file.tensors) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols()));
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      for (Eigen::Index j = 0; j < t.cols(); ++j) put_le<double>(out, t(i, j));
  }
  return out;
}

TensorFile decode_tensor_file(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw FormatError("bad parameter file magic");
  std::size_t pos = sizeof(kMagic);
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kFormatVersion) throw FormatError("unsupported parameter file version");
  TensorFile file;
  file.kind = get_le<std::uint32_t>(bytes, pos);
  const auto n_dims = get_le<std::uint32_t>(bytes, pos);
  for (std::uint32_t i = 0; i < n_dims; ++i) file.dims.push_back(get_le<std::int32_t>(bytes, pos));
  const auto n_tensors = get_le<std::uint32_t>(bytes, pos);
  for (std::uint32_t k = 0; k < n_tensors; ++k) {
    const auto rows = get_le<std::uint32_t>(bytes, pos);
    const auto cols = get_le<std::uint32_t>(bytes, pos);
    if (static_cast<std::uint64_t>(rows) * cols * 8 > bytes.size() - pos)
      throw FormatError("parameter file truncated");
    Mat t(rows, cols);
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = get_le<double>(bytes, pos);
    file.tensors.push_back(std::move(t));
  }
  if (pos != bytes.size()) throw FormatError("trailing bytes in parameter file");
  return file;
}

void write_tensor_file(const std::string& path, const TensorFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  const std::string bytes = encode_tensor_file(file);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed: " + path);
}

TensorFile read_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor_file(bytes);
}

}  // namespace hnav::nn
