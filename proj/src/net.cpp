#include "net.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "error.hpp"
#include "io.hpp"

namespace backplay {

namespace {

using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstMat = Map<const MatrixXd>;
using ConstVec = Map<const VectorXd>;
using Mat = Map<MatrixXd>;
using Vec = Map<VectorXd>;

constexpr char kMagic[4] = {'B', 'P', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) fail(ErrorCode::kParse, "checkpoint truncated at byte " + std::to_string(pos));
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

void orthogonal_fill(double* data, int rows, int cols, double gain, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  MatrixXd a(big, small);
  for (int c = 0; c < small; ++c)
    for (int r = 0; r < big; ++r) a(r, c) = normal(rng);
  Eigen::HouseholderQR<MatrixXd> qr(a);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(big, small);
  // Sign fix makes the distribution uniform over orthogonal matrices.
  const MatrixXd rr = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (int c = 0; c < small; ++c)
    if (rr(c, c) < 0) q.col(c) *= -1.0;
  Mat w(data, rows, cols);
  if (rows >= cols) w = gain * q;
  else w = gain * q.transpose();
}

}  // namespace

std::size_t Architecture::param_count() const {
  const std::size_t d = static_cast<std::size_t>(input_dim), h1 = static_cast<std::size_t>(hidden1),
                    h2 = static_cast<std::size_t>(hidden2), a = static_cast<std::size_t>(num_actions);
  return h1 * d + h1 + h2 * h1 + h2 + a * h2 + a + h2 + 1;
}

std::uint64_t Architecture::hash() const {
  std::uint64_t h = derive_seed(0x4241434b504c4159ULL,  // "BACKPLAY"
                                {1u, static_cast<std::uint64_t>(input_dim),
                                 static_cast<std::uint64_t>(hidden1), static_cast<std::uint64_t>(hidden2),
                                 static_cast<std::uint64_t>(num_actions),
                                 static_cast<std::uint64_t>(input_planes)});
  return h;
}

PolicyValueNet::PolicyValueNet(const Architecture& arch) : arch_(arch) {
  if (arch.input_dim <= 0 || arch.hidden1 <= 0 || arch.hidden2 <= 0 || arch.num_actions <= 0)
    fail(ErrorCode::kInvalidArgument, "architecture dimensions must be positive");
  if (arch.input_planes < 0 || (arch.input_planes > 0 && arch.input_dim % arch.input_planes != 0))
    fail(ErrorCode::kInvalidArgument, "input_planes must divide input_dim");
  params_.assign(arch.param_count(), 0.0);
}

PolicyValueNet::Offsets PolicyValueNet::offsets() const {
  const std::size_t d = static_cast<std::size_t>(arch_.input_dim), h1 = static_cast<std::size_t>(arch_.hidden1),
                    h2 = static_cast<std::size_t>(arch_.hidden2), a = static_cast<std::size_t>(arch_.num_actions);
  Offsets o{};
  o.w1 = 0;
  o.b1 = o.w1 + h1 * d;
  o.w2 = o.b1 + h1;
  o.b2 = o.w2 + h2 * h1;
  o.wp = o.b2 + h2;
  o.bp = o.wp + a * h2;
  o.wv = o.bp + a;
  o.bv = o.wv + h2;
  o.end = o.bv + 1;
  return o;
}

PolicyValueNet PolicyValueNet::initialized(const Architecture& arch, Rng& rng) {
  PolicyValueNet net(arch);
  const Offsets o = net.offsets();
  double* p = net.params_.data();
  orthogonal_fill(p + o.w1, arch.hidden1, arch.input_dim, std::sqrt(2.0), rng);
  orthogonal_fill(p + o.w2, arch.hidden2, arch.hidden1, std::sqrt(2.0), rng);
  orthogonal_fill(p + o.wp, arch.num_actions, arch.hidden2, 0.01, rng);
  orthogonal_fill(p + o.wv, 1, arch.hidden2, 1.0, rng);
  return net;
}

void PolicyValueNet::forward(const MatrixXd& input, ForwardCache& cache) const {
  if (input.rows() != arch_.input_dim)
    fail(ErrorCode::kInvalidArgument, "input has " + std::to_string(input.rows()) + " rows, expected " +
                                          std::to_string(arch_.input_dim));
  const Offsets o = offsets();
  const double* p = params_.data();
  ConstMat w1(p + o.w1, arch_.hidden1, arch_.input_dim);
  ConstVec b1(p + o.b1, arch_.hidden1);
  ConstMat w2(p + o.w2, arch_.hidden2, arch_.hidden1);
  ConstVec b2(p + o.b2, arch_.hidden2);
  ConstMat wp(p + o.wp, arch_.num_actions, arch_.hidden2);
  ConstVec bp(p + o.bp, arch_.num_actions);
  ConstMat wv(p + o.wv, 1, arch_.hidden2);
  const double bv = p[o.bv];

  cache.input = input;
  if (arch_.input_planes > 0) {
    const Eigen::Index n = input.rows() / arch_.input_planes;
    for (Eigen::Index c = 0; c < input.cols(); ++c)
      for (int k = 0; k < arch_.input_planes; ++k) {
        auto seg = cache.input.col(c).segment(k * n, n);
        const double norm = seg.norm();
        if (norm > 0.0) seg /= norm;
      }
  }
  cache.hidden1.noalias() = w1 * cache.input;
  cache.hidden1.colwise() += b1;
  cache.hidden1 = cache.hidden1.cwiseMax(0.0);
  cache.hidden2.noalias() = w2 * cache.hidden1;
  cache.hidden2.colwise() += b2;
  cache.hidden2 = cache.hidden2.cwiseMax(0.0);
  cache.logits.noalias() = wp * cache.hidden2;
  cache.logits.colwise() += bp;
  cache.values = (wv * cache.hidden2).transpose();
  cache.values.array() += bv;
}

void PolicyValueNet::backward(const ForwardCache& cache, const MatrixXd& dlogits,
                              const VectorXd& dvalues, std::span<double> grad) const {
  if (grad.size() != params_.size()) fail(ErrorCode::kInvalidArgument, "gradient buffer size mismatch");
  const Offsets o = offsets();
  const double* p = params_.data();
  double* g = grad.data();
  ConstMat w2(p + o.w2, arch_.hidden2, arch_.hidden1);
  ConstMat wp(p + o.wp, arch_.num_actions, arch_.hidden2);
  ConstMat wv(p + o.wv, 1, arch_.hidden2);

  Mat(g + o.wp, arch_.num_actions, arch_.hidden2).noalias() += dlogits * cache.hidden2.transpose();
  Vec(g + o.bp, arch_.num_actions) += dlogits.rowwise().sum();
  Mat(g + o.wv, 1, arch_.hidden2).noalias() += dvalues.transpose() * cache.hidden2.transpose();
  g[o.bv] += dvalues.sum();

  MatrixXd dz2 = wp.transpose() * dlogits;
  dz2.noalias() += wv.transpose() * dvalues.transpose();
  dz2 = dz2.cwiseProduct((cache.hidden2.array() > 0.0).cast<double>().matrix());

  Mat(g + o.w2, arch_.hidden2, arch_.hidden1).noalias() += dz2 * cache.hidden1.transpose();
  Vec(g + o.b2, arch_.hidden2) += dz2.rowwise().sum();

  MatrixXd dz1 = w2.transpose() * dz2;
  dz1 = dz1.cwiseProduct((cache.hidden1.array() > 0.0).cast<double>().matrix());
  Mat(g + o.w1, arch_.hidden1, arch_.input_dim).noalias() += dz1 * cache.input.transpose();
  Vec(g + o.b1, arch_.hidden1) += dz1.rowwise().sum();
}

void log_softmax(const double* logits, int n, double* out) {
  double mx = logits[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += std::exp(logits[i] - mx);
  const double lse = mx + std::log(sum);
  for (int i = 0; i < n; ++i) out[i] = logits[i] - lse;
}

std::string serialize_checkpoint(const PolicyValueNet& net) {
  const Architecture& a = net.architecture();
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, a.hash());
  put<std::uint64_t>(out, net.params().size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.input_dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.hidden1));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.hidden2));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.num_actions));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.input_planes));
  for (double v : net.params()) put<double>(out, v);
  return out;
}

PolicyValueNet deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    fail(ErrorCode::kParse, "not a checkpoint (bad magic)");
  std::size_t pos = 4;
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion)
    fail(ErrorCode::kParse, "unsupported checkpoint version " + std::to_string(version));
  const auto arch_hash = take<std::uint64_t>(bytes, pos);
  const auto count = take<std::uint64_t>(bytes, pos);
  Architecture a;
  a.input_dim = static_cast<int>(take<std::uint32_t>(bytes, pos));
  a.hidden1 = static_cast<int>(take<std::uint32_t>(bytes, pos));
  a.hidden2 = static_cast<int>(take<std::uint32_t>(bytes, pos));
  a.num_actions = static_cast<int>(take<std::uint32_t>(bytes, pos));
  a.input_planes = static_cast<int>(take<std::uint32_t>(bytes, pos));
  if (a.hash() != arch_hash) fail(ErrorCode::kInvariantViolation, "checkpoint arch_hash does not match its dimensions");
  if (a.param_count() != count) fail(ErrorCode::kInvariantViolation, "checkpoint param_count does not match its architecture");
  if (bytes.size() - pos != count * sizeof(double))
    fail(ErrorCode::kParse, "checkpoint payload has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                                std::to_string(count * sizeof(double)));
  PolicyValueNet net(a);
  std::memcpy(net.params().data(), bytes.data() + pos, count * sizeof(double));
  return net;
}

void save_checkpoint(const PolicyValueNet& net, const std::string& path) {
  write_file(path, serialize_checkpoint(net));
}

PolicyValueNet load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace backplay
