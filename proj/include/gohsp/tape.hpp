#ifndef GOHSP_TAPE_HPP_
#define GOHSP_TAPE_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "gohsp/tensor.hpp"

namespace gohsp {

// Reverse-mode gradient tape. Ops append a value plus a backward closure;
// replaying the closures in reverse accumulates exactly one adjoint per node.
// A tape is built per minibatch and discarded.
class Tape {
public:
    using NodeId = std::int32_t;

    NodeId input(Tensor value);
    const Tensor& value(NodeId id) const { return values_[static_cast<std::size_t>(id)]; }
    std::size_t size() const { return values_.size(); }

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId add_bias(NodeId x, NodeId bias); // bias row broadcast over all rows of x
    NodeId scale(NodeId x, double c);
    NodeId gelu(NodeId x);
    NodeId softmax_rows(NodeId x);
    NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, double eps);
    // Scalar loss; labels are constants.
    NodeId cross_entropy(NodeId logits, std::vector<int> labels);
    NodeId sum(NodeId x);
    NodeId half_sq_norm(NodeId x); // 0.5 * ||x||_F^2

    // --- ViT structural ops --------------------------------------------------
    // images: B x (channels*S*S), channel-major planes -> (B*T) x (channels*P*P)
    NodeId extract_patches(NodeId images, std::size_t image_size, std::size_t patch_size,
                           std::size_t channels);
    // x: (B*T) x d, cls: 1 x d -> (B*(T+1)) x d with cls first per sample
    NodeId prepend_cls(NodeId x, NodeId cls, std::size_t batch);
    // x: (B*T) x d, pos: T x d, tiled over the batch
    NodeId add_pos(NodeId x, NodeId pos, std::size_t batch);
    // x: (B*T) x d -> B x d taking each sample's first row
    NodeId take_first_token(NodeId x, std::size_t batch, std::size_t tokens);

    // qkv: (B*T) x 3C laid out [Q|K|V], head h owning a contiguous channel
    // range within each third. Produces softmaxed attention probabilities of
    // shape (B*H*T) x T; scores are scaled by inv_sqrt_dh before softmax.
    NodeId attention_probs(NodeId qkv, std::vector<int> head_channels, double inv_sqrt_dh,
                           std::size_t batch, std::size_t tokens);
    // probs as above, qkv as above -> (B*T) x C of concatenated head outputs.
    NodeId attention_output(NodeId probs, NodeId qkv, std::vector<int> head_channels,
                            std::size_t batch, std::size_t tokens);

    // Adjoints for every node reachable from root; root must be scalar.
    std::vector<Tensor> backward(NodeId root);

private:
    struct OpRecord {
        NodeId out;
        // Receives the full gradient buffer; reads grads[out], accumulates
        // into the inputs' slots and marks them live.
        std::function<void(Tape&, std::vector<Tensor>&, std::vector<bool>&)> back;
    };

    NodeId push_value(Tensor v);
    Tensor& grad_slot(std::vector<Tensor>& grads, std::vector<bool>& live, NodeId id);

    std::vector<Tensor> values_;
    std::vector<OpRecord> ops_;
};

} // namespace gohsp

#endif // GOHSP_TAPE_HPP_
