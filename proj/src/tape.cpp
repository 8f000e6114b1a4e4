#include "prbench/tape.hpp"

#include <atomic>

#include "prbench/error.hpp"

namespace prb {

namespace {

thread_local GradTape* g_active = nullptr;
std::atomic<std::uint64_t> g_next_uid{1};

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::add_scalar: return "add_scalar";
    case OpKind::matmul: return "matmul";
    case OpKind::add_bias: return "add_bias";
    case OpKind::conv2d_valid: return "conv2d-valid";
    case OpKind::pad2d: return "pad2d";
    case OpKind::avg_pool2d: return "avg_pool2d";
    case OpKind::reshape: return "reshape";
    case OpKind::relu: return "relu";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::row_sum: return "row_sum";
    case OpKind::clamp: return "clamp";
    case OpKind::sign: return "sign";
    case OpKind::log: return "log";
    case OpKind::exp: return "exp";
    case OpKind::sq_l2_norm: return "sq_l2_norm";
    case OpKind::softmax: return "softmax";
    case OpKind::log_softmax: return "log_softmax";
    case OpKind::ce_loss: return "ce_loss";
    case OpKind::kl_loss: return "kl_loss";
    case OpKind::margin_loss: return "margin_loss";
    case OpKind::gather: return "gather";
  }
  return "unknown";
}

GradTape::GradTape() : uid_(g_next_uid.fetch_add(1)) {}

GradTape* GradTape::active() noexcept { return g_active; }

bool GradTape::tracks(const Tensor& t) const noexcept {
  return t.tape_ && t.tape_->tape_uid == uid_ && t.tape_->node >= 0 && t.tape_->node < size();
}

Tensor GradTape::watch(const Tensor& value) {
  Tensor t = value;
  nodes_.push_back(Node{OpKind::leaf, t.shape(), {}, {}});
  t.tape_ = TapeRef{uid_, size() - 1};
  return t;
}

Tensor GradTape::record(OpKind kind, Tensor output, std::initializer_list<const Tensor*> inputs,
                        BackwardFn fn) {
  std::vector<Index> ids;
  ids.reserve(inputs.size());
  bool any = false;
  for (const Tensor* in : inputs) {
    if (tracks(*in)) {
      ids.push_back(in->tape_->node);
      any = true;
    } else {
      ids.push_back(-1);
    }
  }
  if (!any) {
    output.tape_.reset();
    return output;
  }
  nodes_.push_back(Node{kind, output.shape(), std::move(ids), std::move(fn)});
  output.tape_ = TapeRef{uid_, size() - 1};
  return output;
}

std::vector<Tensor> GradTape::backward(const Tensor& root, std::span<const Tensor> wrt) const {
  std::vector<Index> ids;
  ids.reserve(wrt.size());
  for (const Tensor& t : wrt) {
    if (!tracks(t)) throw TapeError("backward: a requested tensor is not on this tape");
    ids.push_back(t.tape_->node);
  }
  return backward(root, ids);
}

std::vector<Tensor> GradTape::backward(const Tensor& root, std::span<const Index> wrt_ids) const {
  if (root.size() != 1) {
    throw TapeError("backward: root must be scalar, got shape " + shape_string(root.shape()));
  }
  if (!tracks(root)) throw TapeError("backward: root is not on this tape");
  for (Index id : wrt_ids) {
    if (id < 0 || id >= size()) throw TapeError("backward: node id " + std::to_string(id) + " is not on the tape");
  }

  const Index root_id = root.tape_->node;
  std::vector<Vector> grads(nodes_.size());
  std::vector<char> live(nodes_.size(), 0);
  grads[static_cast<std::size_t>(root_id)] = Vector::Ones(1);
  live[static_cast<std::size_t>(root_id)] = 1;

  std::vector<Vector*> slots;
  for (Index i = root_id; i >= 0; --i) {
    const auto ui = static_cast<std::size_t>(i);
    const Node& node = nodes_[ui];
    if (!live[ui] || !node.backward) continue;
    slots.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const Index in = node.inputs[k];
      if (in < 0) continue;
      const auto uin = static_cast<std::size_t>(in);
      if (!live[uin]) {
        grads[uin] = Vector::Zero(shape_size(nodes_[uin].shape));
        live[uin] = 1;
      }
      slots[k] = &grads[uin];
    }
    node.backward(grads[ui], slots);
  }

  std::vector<Tensor> out;
  out.reserve(wrt_ids.size());
  for (Index id : wrt_ids) {
    const auto uid = static_cast<std::size_t>(id);
    const Shape& shape = nodes_[uid].shape;
    if (live[uid]) {
      out.emplace_back(shape, grads[uid]);
    } else {
      out.emplace_back(shape);
    }
  }
  return out;
}

Tensor GradTape::gradient(const Tensor& root, const Tensor& wrt) const {
  return backward(root, std::span<const Tensor>(&wrt, 1)).front();
}

TapeScope::TapeScope(GradTape& tape) : previous_(g_active) { g_active = &tape; }

TapeScope::~TapeScope() { g_active = previous_; }

bool recording(std::initializer_list<const Tensor*> inputs) {
  GradTape* tape = GradTape::active();
  if (!tape) return false;
  for (const Tensor* t : inputs) {
    if (tape->tracks(*t)) return true;
  }
  return false;
}

Tensor record_op(OpKind kind, Tensor output, std::initializer_list<const Tensor*> inputs, BackwardFn fn) {
  GradTape* tape = GradTape::active();
  if (!tape) return output.detached();
  return tape->record(kind, std::move(output), inputs, std::move(fn));
}

}  // namespace prb
