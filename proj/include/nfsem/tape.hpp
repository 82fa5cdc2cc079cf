#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nfsem::ad {

using NodeId = std::uint32_t;

enum class Op : std::uint8_t {
  kConst,
  kLeaf,
  kAdd,
  kAddC,
  kSub,
  kMul,
  kMulC,
  kDiv,
  kNeg,
  kSqrt,
  kSin,
  kCos,
  kArccos,
  kAtan2,
  kExp,
  kPowC,
  kSigmoid,
  kRelu,
  kStep,
  kAbs,
  kMin,
  kMax,
  kDot,   // strided dot product of two node ranges
  kDotC,  // gathered dot with constant weights
  kSum,   // strided sum of a node range
  kNorm,  // L2 norm of a strided node range, gradient guarded near zero
  // Fused forms of the primitives above (identical values and gradients,
  // fewer records on hot paths):
  kReluDotBias,  // relu(dot(a, b) + bias)
  kMaskMul,      // a * step(b)
};

const char* op_name(Op op);

// Reverse-mode tape over a flat parameter vector. Values are computed
// eagerly at emission; backward() replays the records once in reverse.
// Construction and backward are single-threaded; independent tapes may run
// concurrently against the same (read-only) parameter vector.
class Tape {
 public:
  static constexpr double kArccosEps = 1e-7;
  static constexpr double kNormGuard = 1e-12;

  explicit Tape(std::span<const double> params) : params_(params) {}

  void reset() {
    op_.clear();
    a_.clear();
    b_.clear();
    n_.clear();
    s_.clear();
    aux_.clear();
    val_.clear();
    idxbuf_.clear();
    wbuf_.clear();
    leaves_.clear();
    ++epoch_;
  }

  std::size_t size() const { return op_.size(); }
  double value(NodeId id) const { return val_[id]; }
  Op op(NodeId id) const { return op_[id]; }

  NodeId constant(double v) { return push(Op::kConst, 0, 0, 0, 0, v, v); }

  // Parameter leaf, deduplicated per tape.
  NodeId leaf(std::uint32_t param_index) {
    NodeId cached;
    if (lookup_leaf(param_index, cached)) return cached;
    const NodeId id = push(Op::kLeaf, param_index, 0, 0, 0, 0.0, params_[param_index]);
    leaves_.push_back({param_index, id});
    insert_leaf(param_index, id);
    return id;
  }

  NodeId add(NodeId a, NodeId b) { return push(Op::kAdd, a, b, 0, 0, 0.0, val_[a] + val_[b]); }
  NodeId addc(NodeId a, double c) { return push(Op::kAddC, a, 0, 0, 0, c, val_[a] + c); }
  NodeId sub(NodeId a, NodeId b) { return push(Op::kSub, a, b, 0, 0, 0.0, val_[a] - val_[b]); }
  NodeId mul(NodeId a, NodeId b) { return push(Op::kMul, a, b, 0, 0, 0.0, val_[a] * val_[b]); }
  NodeId mulc(NodeId a, double c) { return push(Op::kMulC, a, 0, 0, 0, c, val_[a] * c); }
  NodeId div(NodeId a, NodeId b) { return push(Op::kDiv, a, b, 0, 0, 0.0, val_[a] / val_[b]); }
  NodeId neg(NodeId a) { return push(Op::kNeg, a, 0, 0, 0, 0.0, -val_[a]); }
  NodeId sqrt(NodeId a) { return push(Op::kSqrt, a, 0, 0, 0, 0.0, std::sqrt(val_[a])); }
  NodeId sin(NodeId a) { return push(Op::kSin, a, 0, 0, 0, 0.0, std::sin(val_[a])); }
  NodeId cos(NodeId a) { return push(Op::kCos, a, 0, 0, 0, 0.0, std::cos(val_[a])); }
  NodeId arccos(NodeId a) {
    const double x = clamp_acos(val_[a]);
    return push(Op::kArccos, a, 0, 0, 0, 0.0, std::acos(x));
  }
  NodeId atan2(NodeId y, NodeId x) {
    return push(Op::kAtan2, y, x, 0, 0, 0.0, std::atan2(val_[y], val_[x]));
  }
  NodeId exp(NodeId a) { return push(Op::kExp, a, 0, 0, 0, 0.0, std::exp(val_[a])); }
  NodeId powc(NodeId a, double k) { return push(Op::kPowC, a, 0, 0, 0, k, std::pow(val_[a], k)); }
  NodeId sigmoid(NodeId a) {
    const double x = val_[a];
    const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    return push(Op::kSigmoid, a, 0, 0, 0, 0.0, s);
  }
  NodeId relu(NodeId a) { return push(Op::kRelu, a, 0, 0, 0, 0.0, val_[a] > 0.0 ? val_[a] : 0.0); }
  // Heaviside factor: value in {0,1}, derivative defined as zero. Used for
  // activation masks that must stay differentiable-through.
  NodeId step(NodeId a) { return push(Op::kStep, a, 0, 0, 0, 0.0, val_[a] > 0.0 ? 1.0 : 0.0); }
  NodeId abs(NodeId a) { return push(Op::kAbs, a, 0, 0, 0, 0.0, std::fabs(val_[a])); }
  NodeId min(NodeId a, NodeId b) {
    return push(Op::kMin, a, b, 0, 0, 0.0, val_[a] <= val_[b] ? val_[a] : val_[b]);
  }
  NodeId max(NodeId a, NodeId b) {
    return push(Op::kMax, a, b, 0, 0, 0.0, val_[a] >= val_[b] ? val_[a] : val_[b]);
  }

  // dot of val[a_begin + i*a_stride] with val[b_begin + i*b_stride].
  NodeId dot(NodeId a_begin, std::uint32_t a_stride, NodeId b_begin, std::uint32_t b_stride,
             std::uint32_t count) {
    double s = 0.0;
    for (std::uint32_t i = 0; i < count; ++i)
      s += val_[a_begin + i * a_stride] * val_[b_begin + i * b_stride];
    return push(Op::kDot, a_begin, b_begin, count, pack(a_stride, b_stride), 0.0, s);
  }

  // dot of gathered nodes with constant weights.
  NodeId dotc(std::span<const NodeId> ids, std::span<const double> weights) {
    const auto begin = static_cast<std::uint32_t>(idxbuf_.size());
    idxbuf_.insert(idxbuf_.end(), ids.begin(), ids.end());
    wbuf_.insert(wbuf_.end(), weights.begin(), weights.end());
    double s = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) s += val_[ids[i]] * weights[i];
    return push(Op::kDotC, begin, 0, static_cast<std::uint32_t>(ids.size()), 0, 0.0, s);
  }

  NodeId sum(NodeId begin, std::uint32_t stride, std::uint32_t count) {
    double s = 0.0;
    for (std::uint32_t i = 0; i < count; ++i) s += val_[begin + i * stride];
    return push(Op::kSum, begin, 0, count, stride, 0.0, s);
  }

  NodeId norm(NodeId begin, std::uint32_t stride, std::uint32_t count) {
    double s = 0.0;
    for (std::uint32_t i = 0; i < count; ++i) {
      const double v = val_[begin + i * stride];
      s += v * v;
    }
    return push(Op::kNorm, begin, 0, count, stride, 0.0, std::sqrt(s));
  }

  // relu(dot(a, b) + bias) over two unit-stride ranges.
  NodeId relu_dot_bias(NodeId a_begin, NodeId b_begin, std::uint32_t count, NodeId bias) {
    double s = 0.0;
    for (std::uint32_t i = 0; i < count; ++i) s += val_[a_begin + i] * val_[b_begin + i];
    s += val_[bias];
    return push(Op::kReluDotBias, a_begin, b_begin, count, bias, 0.0, s > 0.0 ? s : 0.0);
  }

  // a * step(b): the mask argument contributes no gradient.
  NodeId mask_mul(NodeId a, NodeId b) {
    return push(Op::kMaskMul, a, b, 0, 0, 0.0, val_[b] > 0.0 ? val_[a] : 0.0);
  }

  // Index of the first node with a non-finite value, or -1.
  std::int64_t first_nonfinite() const {
    for (std::size_t i = 0; i < val_.size(); ++i)
      if (!std::isfinite(val_[i])) return static_cast<std::int64_t>(i);
    return -1;
  }

  // Reverse sweep seeding d(seed_node) = 1. Each node is visited exactly
  // once; leaf adjoints are read back via leaves()/adjoint().
  void backward(NodeId seed) {
    const std::pair<NodeId, double> one{seed, 1.0};
    backward_multi({&one, 1});
  }

  // Reverse sweep with several weighted seeds, equivalent to backward on
  // sum(w_i * node_i) without materializing that node.
  void backward_multi(std::span<const std::pair<NodeId, double>> seeds) {
    adj_.assign(val_.size(), 0.0);
    for (const auto& [node, weight] : seeds) adj_[node] += weight;
    for (std::size_t i = op_.size(); i-- > 0;) {
      const double g = adj_[i];
      if (g == 0.0) continue;
      const NodeId a = a_[i];
      const NodeId b = b_[i];
      switch (op_[i]) {
        case Op::kConst:
        case Op::kLeaf:
          break;
        case Op::kAdd:
          adj_[a] += g;
          adj_[b] += g;
          break;
        case Op::kAddC:
          adj_[a] += g;
          break;
        case Op::kSub:
          adj_[a] += g;
          adj_[b] -= g;
          break;
        case Op::kMul:
          adj_[a] += g * val_[b];
          adj_[b] += g * val_[a];
          break;
        case Op::kMulC:
          adj_[a] += g * aux_[i];
          break;
        case Op::kDiv: {
          const double inv = 1.0 / val_[b];
          adj_[a] += g * inv;
          adj_[b] -= g * val_[a] * inv * inv;
          break;
        }
        case Op::kNeg:
          adj_[a] -= g;
          break;
        case Op::kSqrt:
          if (val_[i] > 0.0) adj_[a] += g * 0.5 / val_[i];
          break;
        case Op::kSin:
          adj_[a] += g * std::cos(val_[a]);
          break;
        case Op::kCos:
          adj_[a] -= g * std::sin(val_[a]);
          break;
        case Op::kArccos: {
          const double x = clamp_acos(val_[a]);
          adj_[a] -= g / std::sqrt(1.0 - x * x);
          break;
        }
        case Op::kAtan2: {
          const double y = val_[a];
          const double x = val_[b];
          const double den = x * x + y * y;
          if (den > 1e-300) {
            adj_[a] += g * x / den;
            adj_[b] -= g * y / den;
          }
          break;
        }
        case Op::kExp:
          adj_[a] += g * val_[i];
          break;
        case Op::kPowC: {
          const double k = aux_[i];
          adj_[a] += g * k * std::pow(val_[a], k - 1.0);
          break;
        }
        case Op::kSigmoid: {
          const double s = val_[i];
          adj_[a] += g * s * (1.0 - s);
          break;
        }
        case Op::kRelu:
          if (val_[a] > 0.0) adj_[a] += g;
          break;
        case Op::kStep:
          break;
        case Op::kAbs:
          if (val_[a] > 0.0)
            adj_[a] += g;
          else if (val_[a] < 0.0)
            adj_[a] -= g;
          break;
        case Op::kMin:
          adj_[val_[a] <= val_[b] ? a : b] += g;
          break;
        case Op::kMax:
          adj_[val_[a] >= val_[b] ? a : b] += g;
          break;
        case Op::kDot: {
          const std::uint32_t sa = s_[i] >> 16;
          const std::uint32_t sb = s_[i] & 0xffffu;
          const std::uint32_t cnt = n_[i];
          for (std::uint32_t k = 0; k < cnt; ++k) {
            const NodeId ia = a + k * sa;
            const NodeId ib = b + k * sb;
            adj_[ia] += g * val_[ib];
            adj_[ib] += g * val_[ia];
          }
          break;
        }
        case Op::kDotC: {
          const std::uint32_t cnt = n_[i];
          for (std::uint32_t k = 0; k < cnt; ++k) adj_[idxbuf_[a + k]] += g * wbuf_[a + k];
          break;
        }
        case Op::kSum: {
          const std::uint32_t cnt = n_[i];
          const std::uint32_t st = s_[i];
          for (std::uint32_t k = 0; k < cnt; ++k) adj_[a + k * st] += g;
          break;
        }
        case Op::kNorm: {
          const double v = val_[i];
          if (v >= kNormGuard) {
            const std::uint32_t cnt = n_[i];
            const std::uint32_t st = s_[i];
            for (std::uint32_t k = 0; k < cnt; ++k) adj_[a + k * st] += g * val_[a + k * st] / v;
          }
          break;
        }
        case Op::kReluDotBias: {
          if (val_[i] > 0.0) {
            const std::uint32_t cnt = n_[i];
            for (std::uint32_t k = 0; k < cnt; ++k) {
              adj_[a + k] += g * val_[b + k];
              adj_[b + k] += g * val_[a + k];
            }
            adj_[s_[i]] += g;  // bias node
          }
          break;
        }
        case Op::kMaskMul:
          if (val_[b] > 0.0) adj_[a] += g;
          break;
      }
    }
  }

  double adjoint(NodeId id) const { return adj_[id]; }

  struct LeafRecord {
    std::uint32_t param_index;
    NodeId node;
  };
  const std::vector<LeafRecord>& leaves() const { return leaves_; }

  // Scatter leaf adjoints into a dense gradient vector (in leaf emission
  // order, so repeated accumulation is deterministic).
  void accumulate_gradients(std::span<double> grads) const {
    for (const auto& l : leaves_) grads[l.param_index] += adj_[l.node];
  }

 private:
  static double clamp_acos(double x) {
    const double lim = 1.0 - kArccosEps;
    return x < -lim ? -lim : (x > lim ? lim : x);
  }
  static std::uint32_t pack(std::uint32_t hi, std::uint32_t lo) { return (hi << 16) | lo; }

  NodeId push(Op op, std::uint32_t a, std::uint32_t b, std::uint32_t n, std::uint32_t s, double aux,
              double value) {
    op_.push_back(op);
    a_.push_back(a);
    b_.push_back(b);
    n_.push_back(n);
    s_.push_back(s);
    aux_.push_back(aux);
    val_.push_back(value);
    return static_cast<NodeId>(op_.size() - 1);
  }

  // Open-addressing leaf cache with epoch stamps so reset() is O(1).
  bool lookup_leaf(std::uint32_t key, NodeId& out) const {
    if (map_keys_.empty()) return false;
    const std::size_t mask = map_keys_.size() - 1;
    std::size_t h = (key * 0x9e3779b9u) & mask;
    while (map_epoch_[h] == epoch_) {
      if (map_keys_[h] == key) {
        out = map_vals_[h];
        return true;
      }
      h = (h + 1) & mask;
    }
    return false;
  }

  void insert_leaf(std::uint32_t key, NodeId id) {
    if (map_keys_.empty()) rehash(1 << 14);
    if (leaves_.size() * 2 > map_keys_.size()) rehash(map_keys_.size() * 2);
    const std::size_t mask = map_keys_.size() - 1;
    std::size_t h = (key * 0x9e3779b9u) & mask;
    while (map_epoch_[h] == epoch_) h = (h + 1) & mask;
    map_keys_[h] = key;
    map_vals_[h] = id;
    map_epoch_[h] = epoch_;
  }

  void rehash(std::size_t cap) {
    std::vector<std::uint32_t> keys(cap), vals(cap);
    std::vector<std::uint64_t> stamps(cap, 0);
    std::swap(map_keys_, keys);
    std::swap(map_vals_, vals);
    std::swap(map_epoch_, stamps);
    const std::size_t mask = cap - 1;
    for (const auto& l : leaves_) {
      std::size_t h = (l.param_index * 0x9e3779b9u) & mask;
      while (map_epoch_[h] == epoch_) h = (h + 1) & mask;
      map_keys_[h] = l.param_index;
      map_vals_[h] = l.node;
      map_epoch_[h] = epoch_;
    }
  }

  std::span<const double> params_;
  std::vector<Op> op_;
  std::vector<std::uint32_t> a_, b_, n_, s_;
  std::vector<double> aux_;
  std::vector<double> val_;
  std::vector<double> adj_;
  std::vector<std::uint32_t> idxbuf_;
  std::vector<double> wbuf_;
  std::vector<LeafRecord> leaves_;

  std::vector<std::uint32_t> map_keys_, map_vals_;
  std::vector<std::uint64_t> map_epoch_;
  std::uint64_t epoch_ = 1;
};

// Convenience wrapper: build a scalar graph, check it is finite, run the
// reverse sweep, and return (loss, dense gradient). Throws on a non-finite
// value, naming the offending node.
double forward_backward(const std::function<NodeId(Tape&)>& build, std::span<const double> params,
                        std::span<double> grads_out);

}  // namespace nfsem::ad
