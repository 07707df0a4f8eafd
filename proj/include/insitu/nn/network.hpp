#ifndef INSITU_NN_NETWORK_HPP
#define INSITU_NN_NETWORK_HPP

#include "insitu/core.hpp"
#include "insitu/random.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace insitu::nn {

/// Residual 1-D convolutional encoder followed by a dense decoder.
///
/// Each block holds `convs_per_block` same-padded convolutions with tanh; the
/// first one changes the channel count, and its activation is added to the
/// last one's before pooling. Every block but the last halves the sequence
/// (floor). The flattened code (c * length + t) is concatenated with the
/// standardized elevation and passed through the dense layers, tanh on hidden
/// layers and sigmoid on the output.
struct NetworkConfig {
  Index input_length = 190;
  Index input_channels = 2;
  std::vector<Index> channels{4, 8, 16, 32};
  Index kernel = 5;
  Index convs_per_block = 3;
  Index pool = 2;
  std::vector<Index> dense{380, 190, 190};

  static NetworkConfig standard() { return {}; }
  /// Small network used for gradient checks.
  static NetworkConfig miniature() { return {16, 2, {2, 4}, 5, 3, 2, {8, 16}}; }

  /// Sequence length entering block `b` (b == channels.size() gives the
  /// flattened length per channel).
  Index length_at(std::size_t b) const;
  Index flatten_size() const { return channels.back() * length_at(channels.size()); }
  Index feature_length() const { return 2 * input_length + 1; }
  Index output_length() const { return dense.back(); }

  void validate() const;
  nlohmann::json to_json() const;
  static NetworkConfig from_json(const nlohmann::json& j);
  bool operator==(const NetworkConfig&) const = default;
};

/// One contiguous slice of the flat parameter vector.
struct ParameterSlot {
  std::string name;  // e.g. "block2.conv1.weight", "dense3.bias"
  Index offset = 0;
  Index rows = 0;
  Index cols = 0;
  bool is_weight = true;

  Index size() const { return rows * cols; }
};

std::vector<ParameterSlot> parameter_layout(const NetworkConfig& cfg);
Index parameter_count(const NetworkConfig& cfg);
/// Human-readable per-layer count table.
std::string parameter_table(const NetworkConfig& cfg);
/// Throws with the per-layer table when the count differs from `expected`.
void require_parameter_count(const NetworkConfig& cfg, Index expected);

inline constexpr Index kPublishedParameterCount = 406300;

template <typename Scalar>
class ResidualNetwork {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  struct LossEvaluation {
    Scalar data_loss = 0;  // mean squared error
    Scalar penalty = 0;    // lambda * sum of squared weights
    Scalar loss() const { return data_loss + penalty; }
    Vector gradient;
  };

  /// All parameters zero.
  explicit ResidualNetwork(NetworkConfig cfg)
      : cfg_(std::move(cfg)), slots_(parameter_layout(cfg_)) {
    cfg_.validate();
    params_ = Vector::Zero(nn::parameter_count(cfg_));
    index_slots();
  }

  /// Glorot-uniform weights with bound sqrt(6 / (fan_in + fan_out)), zero
  /// biases.
  static ResidualNetwork glorot(NetworkConfig cfg, std::uint64_t seed) {
    ResidualNetwork net(std::move(cfg));
    Rng rng(seed);
    for (const auto& s : net.slots_) {
      if (!s.is_weight) continue;
      const bool conv = s.name.rfind("block", 0) == 0;
      const double fan_in = static_cast<double>(s.cols);
      const double fan_out = static_cast<double>(conv ? s.rows * net.cfg_.kernel : s.rows);
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (Index i = 0; i < s.size(); ++i) {
        net.params_[s.offset + i] = static_cast<Scalar>(rng.uniform(-bound, bound));
      }
    }
    return net;
  }

  const NetworkConfig& config() const { return cfg_; }
  const std::vector<ParameterSlot>& layout() const { return slots_; }
  Index parameter_count() const { return params_.size(); }
  const Vector& parameters() const { return params_; }
  Vector& parameters() { return params_; }

  /// 1 for weights, 0 for biases.
  Vector weight_mask() const {
    Vector m = Vector::Zero(params_.size());
    for (const auto& s : slots_) {
      if (s.is_weight) m.segment(s.offset, s.size()).setOnes();
    }
    return m;
  }
  Scalar weight_norm2() const {
    Scalar sum = 0;
    for (const auto& s : slots_) {
      if (s.is_weight) sum += params_.segment(s.offset, s.size()).squaredNorm();
    }
    return sum;
  }

  /// Standardized features (rows x 2L+1) to predictions (rows x L).
  Matrix forward(const Matrix& features) const {
    Tape tape;
    return run_forward(features, tape).transpose();
  }

  /// Sum of squared errors over the batch and its gradient, both divided by
  /// `normalizer`. Shards of one mini-batch share the normalizer so their
  /// results add up to the full-batch values.
  Scalar squared_error_gradient(const Matrix& features, const Matrix& labels, Scalar normalizer,
                                Vector& gradient) const {
    if (labels.rows() != features.rows() || labels.cols() != cfg_.output_length()) {
      throw std::invalid_argument("label batch shape mismatch");
    }
    Tape tape;
    const Matrix pred = run_forward(features, tape);
    const Matrix diff = pred - labels.transpose();
    gradient = Vector::Zero(params_.size());
    run_backward(tape, (Scalar(2) / normalizer) * diff, gradient);
    return diff.squaredNorm() / normalizer;
  }

  /// Mean squared error plus lambda * sum of squared weights (biases are not
  /// penalized), with the gradient of the total.
  LossEvaluation loss_and_gradient(const Matrix& features, const Matrix& labels,
                                   Scalar lambda) const {
    if (features.rows() == 0) throw std::invalid_argument("empty batch");
    LossEvaluation e;
    const Scalar n = static_cast<Scalar>(labels.rows() * labels.cols());
    e.data_loss = squared_error_gradient(features, labels, n, e.gradient);
    if (lambda != Scalar(0)) {
      e.penalty = lambda * weight_norm2();
      e.gradient += (Scalar(2) * lambda) * weight_mask().cwiseProduct(params_);
    }
    return e;
  }

 private:
  struct ConvIndex {
    Index w, b, cin, cout;
  };
  struct DenseIndex {
    Index w, b, in, out;
  };
  struct BlockTape {
    std::vector<Matrix> cols;  // im2col inputs per conv
    std::vector<Matrix> act;   // tanh outputs per conv
    std::vector<Index> argmax;
    Index length = 0;
  };
  struct Tape {
    Index batch = 0;
    std::vector<BlockTape> blocks;
    std::vector<Matrix> dense_in;  // inputs to each dense layer
    Matrix output;
  };

  void index_slots() {
    std::size_t s = 0;
    for (std::size_t b = 0; b < cfg_.channels.size(); ++b) {
      for (Index c = 0; c < cfg_.convs_per_block; ++c, s += 2) {
        const auto& w = slots_[s];
        conv_.push_back({w.offset, slots_[s + 1].offset, w.cols / cfg_.kernel, w.rows});
      }
    }
    for (; s < slots_.size(); s += 2) {
      const auto& w = slots_[s];
      dense_.push_back({w.offset, slots_[s + 1].offset, w.cols, w.rows});
    }
  }

  Eigen::Map<const Matrix> weight(Index offset, Index rows, Index cols) const {
    return {params_.data() + offset, rows, cols};
  }
  Eigen::Map<const Vector> bias(Index offset, Index size) const {
    return {params_.data() + offset, size};
  }

  // Columns are sample-major: sample b occupies [b * len, (b + 1) * len).
  Matrix im2col(const Matrix& x, Index batch, Index len) const {
    const Index k = cfg_.kernel;
    const Index pad = k / 2;
    Matrix cols = Matrix::Zero(x.rows() * k, batch * len);
    for (Index c = 0; c < x.rows(); ++c) {
      for (Index j = 0; j < k; ++j) {
        const Index row = c * k + j;
        for (Index b = 0; b < batch; ++b) {
          const Index base = b * len;
          const Index lo = std::max<Index>(0, pad - j);
          const Index hi = std::min<Index>(len, len + pad - j);
          for (Index t = lo; t < hi; ++t) cols(row, base + t) = x(c, base + t + j - pad);
        }
      }
    }
    return cols;
  }

  Matrix col2im(const Matrix& cols, Index channels, Index batch, Index len) const {
    const Index k = cfg_.kernel;
    const Index pad = k / 2;
    Matrix x = Matrix::Zero(channels, batch * len);
    for (Index c = 0; c < channels; ++c) {
      for (Index j = 0; j < k; ++j) {
        const Index row = c * k + j;
        for (Index b = 0; b < batch; ++b) {
          const Index base = b * len;
          const Index lo = std::max<Index>(0, pad - j);
          const Index hi = std::min<Index>(len, len + pad - j);
          for (Index t = lo; t < hi; ++t) x(c, base + t + j - pad) += cols(row, base + t);
        }
      }
    }
    return x;
  }

  Matrix run_forward(const Matrix& features, Tape& tape) const {
    const Index n = cfg_.input_length;
    if (features.cols() != cfg_.feature_length()) {
      throw std::invalid_argument("feature length " + std::to_string(features.cols()) +
                                  " does not match network input " +
                                  std::to_string(cfg_.feature_length()));
    }
    const Index batch = features.rows();
    tape.batch = batch;
    Matrix x(cfg_.input_channels, batch * n);
    for (Index b = 0; b < batch; ++b) {
      x.row(0).segment(b * n, n) = features.row(b).head(n);
      x.row(1).segment(b * n, n) = features.row(b).segment(n, n);
    }

    Index len = n;
    std::size_t ci = 0;
    tape.blocks.assign(cfg_.channels.size(), {});
    for (std::size_t blk = 0; blk < cfg_.channels.size(); ++blk) {
      BlockTape& bt = tape.blocks[blk];
      bt.length = len;
      Matrix a = x;
      for (Index c = 0; c < cfg_.convs_per_block; ++c, ++ci) {
        const auto& cv = conv_[ci];
        bt.cols.push_back(im2col(a, batch, len));
        Matrix z = weight(cv.w, cv.cout, cv.cin * cfg_.kernel) * bt.cols.back();
        z.colwise() += bias(cv.b, cv.cout);
        a = z.array().tanh().matrix();
        bt.act.push_back(a);
      }
      const Matrix sum = bt.act.front() + bt.act.back();
      if (blk + 1 == cfg_.channels.size()) {
        x = sum;
        break;
      }
      const Index out = len / cfg_.pool;
      x.resize(sum.rows(), batch * out);
      bt.argmax.resize(static_cast<std::size_t>(x.size()));
      for (Index b = 0; b < batch; ++b) {
        for (Index t = 0; t < out; ++t) {
          for (Index c = 0; c < sum.rows(); ++c) {
            const Index start = b * len + t * cfg_.pool;
            Index best = start;
            for (Index p = 1; p < cfg_.pool; ++p) {
              if (sum(c, start + p) > sum(c, best)) best = start + p;
            }
            x(c, b * out + t) = sum(c, best);
            bt.argmax[static_cast<std::size_t>(b * out + t) * static_cast<std::size_t>(sum.rows()) +
                      static_cast<std::size_t>(c)] = best;
          }
        }
      }
      len = out;
    }

    const Index flat = cfg_.flatten_size();
    Matrix h(flat + 1, batch);
    for (Index b = 0; b < batch; ++b) {
      for (Index c = 0; c < x.rows(); ++c) h.col(b).segment(c * len, len) = x.row(c).segment(b * len, len).transpose();
      h(flat, b) = features(b, 2 * n);
    }
    tape.dense_in.clear();
    for (std::size_t d = 0; d < dense_.size(); ++d) {
      const auto& dl = dense_[d];
      tape.dense_in.push_back(h);
      Matrix z = weight(dl.w, dl.out, dl.in) * h;
      z.colwise() += bias(dl.b, dl.out);
      if (d + 1 == dense_.size()) {
        h = (Scalar(1) / (Scalar(1) + (-z.array()).exp())).matrix();
      } else {
        h = z.array().tanh().matrix();
      }
    }
    tape.output = h;
    return h;
  }

  void run_backward(const Tape& tape, const Matrix& d_output, Vector& grad) const {
    const Index batch = tape.batch;
    Matrix dh = d_output;
    Matrix h_out = tape.output;
    for (std::size_t d = dense_.size(); d-- > 0;) {
      const auto& dl = dense_[d];
      Matrix dz;
      if (d + 1 == dense_.size()) {
        dz = dh.cwiseProduct((h_out.array() * (Scalar(1) - h_out.array())).matrix());
      } else {
        dz = dh.cwiseProduct((Scalar(1) - h_out.array().square()).matrix());
      }
      const Matrix& in = tape.dense_in[d];
      Eigen::Map<Matrix>(grad.data() + dl.w, dl.out, dl.in) += dz * in.transpose();
      Eigen::Map<Vector>(grad.data() + dl.b, dl.out) += dz.rowwise().sum();
      dh = weight(dl.w, dl.out, dl.in).transpose() * dz;
      h_out = in;
    }

    const std::size_t nblocks = cfg_.channels.size();
    Index len = cfg_.length_at(nblocks);
    const Index cl = cfg_.channels.back();
    Matrix dx(cl, batch * len);
    for (Index b = 0; b < batch; ++b) {
      for (Index c = 0; c < cl; ++c) dx.row(c).segment(b * len, len) = dh.col(b).segment(c * len, len).transpose();
    }

    std::size_t ci = conv_.size();
    for (std::size_t blk = nblocks; blk-- > 0;) {
      const BlockTape& bt = tape.blocks[blk];
      const Index blen = bt.length;
      Matrix ds;
      if (blk + 1 == nblocks) {
        ds = dx;
      } else {
        ds = Matrix::Zero(dx.rows(), batch * blen);
        for (Index j = 0; j < dx.cols(); ++j) {
          for (Index c = 0; c < dx.rows(); ++c) {
            ds(c, bt.argmax[static_cast<std::size_t>(j) * static_cast<std::size_t>(dx.rows()) +
                            static_cast<std::size_t>(c)]) += dx(c, j);
          }
        }
      }
      std::vector<Matrix> da(static_cast<std::size_t>(cfg_.convs_per_block),
                             Matrix::Zero(ds.rows(), ds.cols()));
      da.front() = ds;
      da.back() = ds;
      for (Index c = cfg_.convs_per_block; c-- > 0;) {
        const auto& cv = conv_[--ci];
        const Matrix& a = bt.act[static_cast<std::size_t>(c)];
        const Matrix dz = da[static_cast<std::size_t>(c)].cwiseProduct((Scalar(1) - a.array().square()).matrix());
        Eigen::Map<Matrix>(grad.data() + cv.w, cv.cout, cv.cin * cfg_.kernel) +=
            dz * bt.cols[static_cast<std::size_t>(c)].transpose();
        Eigen::Map<Vector>(grad.data() + cv.b, cv.cout) += dz.rowwise().sum();
        if (c == 0 && blk == 0) break;
        const Matrix dcols = weight(cv.w, cv.cout, cv.cin * cfg_.kernel).transpose() * dz;
        Matrix dprev = col2im(dcols, cv.cin, batch, blen);
        if (c > 0) {
          da[static_cast<std::size_t>(c - 1)] += dprev;
        } else {
          dx = std::move(dprev);
        }
      }
    }
  }

  NetworkConfig cfg_;
  std::vector<ParameterSlot> slots_;
  std::vector<ConvIndex> conv_;
  std::vector<DenseIndex> dense_;
  Vector params_;
};

}  // namespace insitu::nn

#endif  // INSITU_NN_NETWORK_HPP
