#include "shift/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace shift::nn {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

void check_arch(const std::vector<LayerSpec>& arch) {
  if (arch.empty()) throw ConfigError("empty architecture");
  for (std::size_t i = 0; i < arch.size(); ++i) {
    if (arch[i].in <= 0 || arch[i].out <= 0) throw ConfigError("layer dims must be positive");
    if (i > 0 && arch[i].in != arch[i - 1].out)
      throw ConfigError("layer dims do not chain");
  }
}

}  // namespace

std::size_t Mlp::num_params() const {
  std::size_t n = 0;
  for (const LayerSpec& l : arch) n += static_cast<std::size_t>(l.in) * l.out + l.out;
  return n;
}

Mlp make_mlp(const std::vector<LayerSpec>& arch, std::uint64_t seed) {
  check_arch(arch);
  Mlp m;
  m.arch = arch;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const LayerSpec& l : arch) {
    double scale = std::sqrt(2.0 / l.in);
    Eigen::MatrixXd w(l.out, l.in);
    for (int i = 0; i < l.out; ++i)
      for (int j = 0; j < l.in; ++j) w(i, j) = scale * gauss(rng);
    m.w.push_back(std::move(w));
    m.b.push_back(Eigen::VectorXd::Zero(l.out));
  }
  return m;
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::SiLU: return z * sigmoid(z);
    case Activation::Sigmoid: return sigmoid(z);
  }
  throw DomainError("unknown activation");
}

double activate_deriv(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::SiLU: {
      double s = sigmoid(z);
      return s * (1.0 + z * (1.0 - s));
    }
    case Activation::Sigmoid: {
      double s = sigmoid(z);
      return s * (1.0 - s);
    }
  }
  throw DomainError("unknown activation");
}

Eigen::MatrixXd forward(const Mlp& m, const Eigen::MatrixXd& x) {
  if (x.rows() != m.input_dim()) throw ShapeError("input dim mismatch");
  Eigen::MatrixXd a = x;
  for (int l = 0; l < m.num_layers(); ++l) {
    Eigen::MatrixXd z = (m.w[l] * a).colwise() + m.b[l];
    a = z.unaryExpr([&](double v) { return activate(m.arch[l].act, v); });
  }
  return a;
}

Eigen::VectorXd forward1(const Mlp& m, const Eigen::VectorXd& x) {
  return forward(m, Eigen::MatrixXd(x)).col(0);
}

Gradients grad(const Mlp& m, const Eigen::MatrixXd& x, const OutputLoss& loss) {
  if (x.rows() != m.input_dim()) throw ShapeError("input dim mismatch");
  const int L = m.num_layers();
  std::vector<Eigen::MatrixXd> acts(L + 1);  // acts[0] = input
  std::vector<Eigen::MatrixXd> pre(L);
  acts[0] = x;
  for (int l = 0; l < L; ++l) {
    pre[l] = (m.w[l] * acts[l]).colwise() + m.b[l];
    acts[l + 1] = pre[l].unaryExpr([&](double v) { return activate(m.arch[l].act, v); });
  }

  Gradients g;
  Eigen::MatrixXd dldy;
  g.loss = loss(acts[L], dldy);
  if (dldy.rows() != acts[L].rows() || dldy.cols() != acts[L].cols())
    throw ShapeError("loss gradient shape mismatch");

  g.dw.resize(L);
  g.db.resize(L);
  Eigen::MatrixXd delta = dldy;
  for (int l = L - 1; l >= 0; --l) {
    Eigen::MatrixXd dact =
        pre[l].unaryExpr([&](double v) { return activate_deriv(m.arch[l].act, v); });
    delta = delta.cwiseProduct(dact);
    g.dw[l] = delta * acts[l].transpose();
    g.db[l] = delta.rowwise().sum();
    delta = (m.w[l].transpose() * delta).eval();
  }
  g.dx = delta;
  return g;
}

OutputLoss mse_loss(const Eigen::MatrixXd& targets) {
  return [targets](const Eigen::MatrixXd& y, Eigen::MatrixXd& dldy) {
    if (y.rows() != targets.rows() || y.cols() != targets.cols())
      throw ShapeError("mse target shape mismatch");
    Eigen::MatrixXd diff = y - targets;
    double n = static_cast<double>(diff.size());
    dldy = 2.0 * diff / n;
    return diff.squaredNorm() / n;
  };
}

AdamState make_adam(const Mlp& m, double lr) {
  AdamState st;
  st.lr = lr;
  for (int l = 0; l < m.num_layers(); ++l) {
    st.mw.push_back(Eigen::MatrixXd::Zero(m.w[l].rows(), m.w[l].cols()));
    st.vw.push_back(Eigen::MatrixXd::Zero(m.w[l].rows(), m.w[l].cols()));
    st.mb.push_back(Eigen::VectorXd::Zero(m.b[l].size()));
    st.vb.push_back(Eigen::VectorXd::Zero(m.b[l].size()));
  }
  return st;
}

void adam_step(Mlp& m, AdamState& st, const Gradients& g) {
  if (static_cast<int>(g.dw.size()) != m.num_layers())
    throw ShapeError("gradient/model layer mismatch");
  st.t += 1;
  double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (int l = 0; l < m.num_layers(); ++l) {
    st.mw[l] = st.beta1 * st.mw[l] + (1.0 - st.beta1) * g.dw[l];
    st.vw[l] = st.beta2 * st.vw[l] + (1.0 - st.beta2) * g.dw[l].cwiseProduct(g.dw[l]);
    st.mb[l] = st.beta1 * st.mb[l] + (1.0 - st.beta1) * g.db[l];
    st.vb[l] = st.beta2 * st.vb[l] + (1.0 - st.beta2) * g.db[l].cwiseProduct(g.db[l]);
    m.w[l] -= st.lr * (st.mw[l] / c1).cwiseQuotient((st.vw[l] / c2).cwiseSqrt().array().matrix() +
                                                    Eigen::MatrixXd::Constant(m.w[l].rows(), m.w[l].cols(), st.eps));
    m.b[l] -= st.lr * (st.mb[l] / c1).cwiseQuotient((st.vb[l] / c2).cwiseSqrt() +
                                                    Eigen::VectorXd::Constant(m.b[l].size(), st.eps));
  }
}

namespace {
constexpr char kMagic[4] = {'S', 'L', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& f, T& v) {
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw FormatError("truncated checkpoint");
}
}  // namespace

void save_model(const Mlp& m, const std::string& path, const std::string& meta) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(kMagic, 4);
  write_pod(f, kVersion);
  std::uint32_t mlen = static_cast<std::uint32_t>(meta.size());
  write_pod(f, mlen);
  f.write(meta.data(), mlen);
  std::uint32_t layers = static_cast<std::uint32_t>(m.num_layers());
  write_pod(f, layers);
  for (const LayerSpec& l : m.arch) {
    write_pod(f, static_cast<std::int32_t>(l.in));
    write_pod(f, static_cast<std::int32_t>(l.out));
    write_pod(f, static_cast<std::int32_t>(l.act));
  }
  for (int l = 0; l < m.num_layers(); ++l) {
    f.write(reinterpret_cast<const char*>(m.w[l].data()), sizeof(double) * m.w[l].size());
    f.write(reinterpret_cast<const char*>(m.b[l].data()), sizeof(double) * m.b[l].size());
  }
  if (!f) throw IoError("write failed for " + path);
}

LoadedModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad checkpoint magic");
  std::uint32_t version;
  read_pod(f, version);
  if (version != kVersion) throw FormatError("unsupported checkpoint version");
  std::uint32_t mlen;
  read_pod(f, mlen);
  if (mlen > (1u << 20)) throw FormatError("unreasonable header length");
  LoadedModel out;
  out.meta.resize(mlen);
  f.read(out.meta.data(), mlen);
  if (!f) throw FormatError("truncated checkpoint");
  std::uint32_t layers;
  read_pod(f, layers);
  if (layers == 0 || layers > 64) throw FormatError("unreasonable layer count");
  for (std::uint32_t l = 0; l < layers; ++l) {
    std::int32_t in, outdim, act;
    read_pod(f, in);
    read_pod(f, outdim);
    read_pod(f, act);
    if (in <= 0 || outdim <= 0 || act < 0 || act > 2) throw FormatError("bad layer spec");
    out.model.arch.push_back({in, outdim, static_cast<Activation>(act)});
  }
  for (std::uint32_t l = 0; l < layers; ++l) {
    const LayerSpec& spec = out.model.arch[l];
    Eigen::MatrixXd w(spec.out, spec.in);
    Eigen::VectorXd b(spec.out);
    f.read(reinterpret_cast<char*>(w.data()), sizeof(double) * w.size());
    f.read(reinterpret_cast<char*>(b.data()), sizeof(double) * b.size());
    if (!f) throw FormatError("truncated checkpoint");
    out.model.w.push_back(std::move(w));
    out.model.b.push_back(std::move(b));
  }
  char extra;
  if (f.read(&extra, 1)) throw FormatError("trailing bytes in checkpoint");
  return out;
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

}  // namespace shift::nn
