#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "i2i/shape.hpp"

namespace i2i {

template <class S>
class TapeT;

/// Dense rank-5 tensor. The buffer is shared and treated as immutable once the
/// producing operation has written it; ops never modify their inputs. A tensor
/// may carry a handle (tape + slot) linking it into a differentiation tape.
template <class S>
class TensorT {
public:
    using Scalar = S;

    TensorT() : TensorT(Shape5{}) {}

    explicit TensorT(const Shape5& shape)
        : shape_(shape), data_(std::make_shared<std::vector<S>>()) {
        check_extents(shape);
        data_->assign(static_cast<std::size_t>(shape.numel()), S(0));
    }

    static TensorT full(const Shape5& shape, S value) {
        TensorT t(shape);
        for (auto& v : *t.data_) v = value;
        return t;
    }

    static TensorT from_data(const Shape5& shape, std::vector<S> values) {
        check_extents(shape);
        if (static_cast<std::int64_t>(values.size()) != shape.numel())
            throw std::invalid_argument(detail::msg("buffer length ", values.size(),
                                                    " does not match shape ", shape.str()));
        TensorT t;
        t.shape_ = shape;
        t.data_ = std::make_shared<std::vector<S>>(std::move(values));
        return t;
    }

    const Shape5& shape() const { return shape_; }
    std::int64_t numel() const { return shape_.numel(); }

    std::span<const S> data() const { return {data_->data(), data_->size()}; }
    std::span<S> mutable_data() { return {data_->data(), data_->size()}; }
    const std::shared_ptr<std::vector<S>>& buffer() const { return data_; }

    S at(std::int64_t n, std::int64_t c, std::int64_t d, std::int64_t h, std::int64_t w) const {
        return (*data_)[static_cast<std::size_t>(shape_.offset(n, c, d, h, w))];
    }
    S& at_mut(std::int64_t n, std::int64_t c, std::int64_t d, std::int64_t h, std::int64_t w) {
        return (*data_)[static_cast<std::size_t>(shape_.offset(n, c, d, h, w))];
    }

    /// Value of a scalar (all extents 1) tensor.
    S value() const {
        if (numel() != 1)
            throw std::invalid_argument(detail::msg("expected scalar tensor, got ", shape_.str()));
        return (*data_)[0];
    }

    bool on_tape() const { return tape_ != nullptr; }
    TapeT<S>* tape() const { return tape_; }
    int slot() const { return slot_; }

private:
    Shape5 shape_;
    std::shared_ptr<std::vector<S>> data_;
    TapeT<S>* tape_ = nullptr;
    int slot_ = -1;

    friend class TapeT<S>;
};

/// Reverse-mode differentiation tape. Operations append nodes in execution
/// order, which is a topological order by construction. backward() seeds the
/// scalar loss with 1 and replays the nodes in reverse, accumulating exact
/// gradients per slot; slots the loss does not reach keep zero gradients.
///
/// The tape is confined to one logical thread.
template <class S>
class TapeT {
public:
    TapeT() = default;
    TapeT(const TapeT&) = delete;
    TapeT& operator=(const TapeT&) = delete;

    /// Register a tensor as a leaf (parameter or input) on this tape.
    /// Returns an alias sharing the same buffer.
    TensorT<S> leaf(const TensorT<S>& t) {
        if (t.tape_ == this) return t;
        if (t.tape_ != nullptr)
            throw std::invalid_argument("tensor already belongs to a different tape");
        TensorT<S> bound = t;
        bound.tape_ = this;
        bound.slot_ = new_slot(t.shape());
        return bound;
    }

    /// Claim a slot for an op result. The op then records its node with
    /// push_node(); the two-step split lets the backward closure capture the
    /// output slot.
    TensorT<S> adopt(TensorT<S> result) {
        result.tape_ = this;
        result.slot_ = new_slot(result.shape());
        return result;
    }

    /// Record an executed operation. `backward` must accumulate into the
    /// gradient buffers of the input slots it captured; slot -1 marks a
    /// constant (untracked) input and receives nothing.
    void push_node(int out_slot, std::vector<int> input_slots,
                   std::function<void(TapeT&)> backward) {
        nodes_.push_back(Node{out_slot, std::move(input_slots), std::move(backward)});
    }

    /// Run reverse-mode accumulation from a scalar loss produced on this tape.
    void backward(const TensorT<S>& loss) {
        if (loss.tape_ != this)
            throw std::invalid_argument("backward: loss tensor is not on this tape");
        if (loss.numel() != 1)
            throw std::invalid_argument(detail::msg("backward: loss must be scalar, got shape ",
                                                    loss.shape().str()));
        grads_.clear();
        grads_.resize(slot_shapes_.size());
        for (std::size_t i = 0; i < slot_shapes_.size(); ++i)
            grads_[i].assign(static_cast<std::size_t>(slot_shapes_[i].numel()), S(0));
        grads_[static_cast<std::size_t>(loss.slot_)][0] = S(1);
        ran_backward_ = true;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward(*this);
    }

    bool has_gradients() const { return ran_backward_; }

    /// Gradient accumulator for a tensor on this tape (valid after backward()).
    const std::vector<S>& grad(const TensorT<S>& t) const {
        if (t.tape_ != this) throw std::invalid_argument("grad: tensor is not on this tape");
        return grad(t.slot_);
    }

    const std::vector<S>& grad(int slot) const {
        if (!ran_backward_) throw std::logic_error("grad: backward() has not run");
        return grads_.at(static_cast<std::size_t>(slot));
    }

    std::vector<S>& grad_mut(int slot) { return grads_.at(static_cast<std::size_t>(slot)); }

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t slot_count() const { return slot_shapes_.size(); }
    const Shape5& slot_shape(int slot) const {
        return slot_shapes_.at(static_cast<std::size_t>(slot));
    }

private:
    struct Node {
        int out_slot;
        std::vector<int> in_slots;
        std::function<void(TapeT&)> backward;
    };

    int new_slot(const Shape5& shape) {
        slot_shapes_.push_back(shape);
        return static_cast<int>(slot_shapes_.size()) - 1;
    }

    std::vector<Shape5> slot_shapes_;
    std::vector<Node> nodes_;
    std::vector<std::vector<S>> grads_;
    bool ran_backward_ = false;
};

using Tensor = TensorT<float>;
using Tape = TapeT<float>;

}  // namespace i2i
