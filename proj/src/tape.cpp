#include "nfsem/tape.hpp"

#include <algorithm>

namespace nfsem::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::kConst: return "const";
    case Op::kLeaf: return "leaf";
    case Op::kAdd: return "add";
    case Op::kAddC: return "addc";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kMulC: return "mulc";
    case Op::kDiv: return "div";
    case Op::kNeg: return "neg";
    case Op::kSqrt: return "sqrt";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kArccos: return "arccos";
    case Op::kAtan2: return "atan2";
    case Op::kExp: return "exp";
    case Op::kPowC: return "pow";
    case Op::kSigmoid: return "sigmoid";
    case Op::kRelu: return "relu";
    case Op::kStep: return "step";
    case Op::kAbs: return "abs";
    case Op::kMin: return "min";
    case Op::kMax: return "max";
    case Op::kDot: return "dot";
    case Op::kDotC: return "dotc";
    case Op::kSum: return "sum";
    case Op::kNorm: return "norm";
    case Op::kReluDotBias: return "relu_dot_bias";
    case Op::kMaskMul: return "mask_mul";
  }
  return "?";
}

double forward_backward(const std::function<NodeId(Tape&)>& build, std::span<const double> params,
                        std::span<double> grads_out) {
  if (grads_out.size() != params.size())
    throw std::invalid_argument("forward_backward: gradient/parameter length mismatch");
  Tape tape(params);
  const NodeId out = build(tape);
  if (!std::isfinite(tape.value(out))) {
    const std::int64_t bad = tape.first_nonfinite();
    throw std::runtime_error("forward_backward: non-finite value at node " + std::to_string(bad) +
                             " (op " + op_name(tape.op(static_cast<NodeId>(bad))) + ")");
  }
  tape.backward(out);
  std::fill(grads_out.begin(), grads_out.end(), 0.0);
  tape.accumulate_gradients(grads_out);
  return tape.value(out);
}

}  // namespace nfsem::ad
