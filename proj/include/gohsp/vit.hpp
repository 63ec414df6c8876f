#ifndef GOHSP_VIT_HPP_
#define GOHSP_VIT_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "gohsp/tape.hpp"
#include "gohsp/tensor.hpp"

namespace gohsp {

struct VitConfig {
    std::size_t image_size = 32;
    std::size_t patch_size = 4;
    std::size_t channels = 3;
    std::size_t d = 64;  // embedding width (residual stream)
    std::size_t L = 4;   // transformer blocks
    std::size_t H = 4;   // attention heads per block
    std::size_t m = 128; // MLP hidden width
    std::size_t C = 10;  // classes

    std::size_t head_dim() const { return d / H; }
    std::size_t grid() const { return image_size / patch_size; }
    std::size_t tokens() const { return grid() * grid() + 1; } // patches + class token
    std::size_t patch_dim() const { return channels * patch_size * patch_size; }
    void validate() const; // throws ConfigError
};

// Desk-scale default: trains in minutes on a CPU while exercising every
// sparsity pattern (multiple blocks, heads, and MLP columns).
VitConfig desk_config();
// Published model shapes, used for parameter/FLOP arithmetic only.
VitConfig vit_small_config(); // 32x32 input, d=768, L=8, H=8, m=2304... see impl
VitConfig deit_tiny_config();

// One transformer block. Weight layout convention is input x output
// (row-major), so a "column" is an output unit:
//   w_qkv:  d x 3*Ct, thirds [Q|K|V]; within each third, head h owns a
//           contiguous channel range of width head_channels[h] (Ct = sum).
//   w_proj: Ct x d — row c is paired with attention channel c.
//   w_fc1:  d x m' (columns = hidden units), w_fc2: m' x d (row-paired).
// Dense blocks have head_channels = {d/H, ..., d/H}; compaction shrinks it.
struct BlockWeights {
    Tensor ln1_g, ln1_b;
    Tensor w_qkv, b_qkv;
    Tensor w_proj, b_proj;
    Tensor ln2_g, ln2_b;
    Tensor w_fc1, b_fc1;
    Tensor w_fc2, b_fc2;
    std::vector<int> head_channels;

    std::size_t total_channels() const;
    std::size_t hidden() const { return w_fc1.cols(); }
};

struct ModelWeights {
    VitConfig cfg;
    Tensor patch_embed, patch_bias; // patch_dim x d, d
    Tensor cls;                     // 1 x d
    Tensor pos;                     // tokens x d
    std::vector<BlockWeights> blocks;
    Tensor ln_f_g, ln_f_b;
    Tensor head_w, head_b; // d x C, C

    void validate() const; // shape consistency vs cfg + head_channels
};

// Layer-norm epsilon used by every model forward.
inline constexpr double kLnEps = 1e-5;

// Gaussian(0, 0.02) weights, zero biases, unit layer-norm gains. Each tensor
// draws from its own derived RNG stream so adding parameters elsewhere never
// shifts another tensor's values.
ModelWeights init_model(const VitConfig& cfg, std::uint64_t seed);

// Stable parameter enumeration shared by training, checkpoints, and reports.
std::vector<Tensor*> param_tensors(ModelWeights& model);
std::vector<const Tensor*> param_tensors(const ModelWeights& model);
std::vector<std::string> param_names(const ModelWeights& model);

// Batch-summed pre-projection attention outputs, indexed [block][head], each
// tokens x head_channels[h]. This is the ranking stage's raw material.
struct HeadCapture {
    std::vector<std::vector<Tensor>> head_sums;
    std::size_t samples = 0;
};

// One taped forward pass. `params[i]` is the tape id of param_tensors(...)[i];
// logits is B x C; loss is -1 unless labels were supplied.
struct ForwardPass {
    Tape tape;
    std::vector<Tape::NodeId> params;
    Tape::NodeId logits = -1;
    Tape::NodeId loss = -1;
};

// images: B x (channels * image_size^2), channel-major planes per row.
// Capturing never changes any computed value (it only reads them).
ForwardPass forward(const ModelWeights& model, const Tensor& images,
                    const std::vector<int>* labels = nullptr, HeadCapture* capture = nullptr);

Tensor predict(const ModelWeights& model, const Tensor& images);
// Argmax accuracy, ties resolved toward the lower class index.
double accuracy(const ModelWeights& model, const Tensor& images, const std::vector<int>& labels,
                std::size_t eval_batch = 128);

// Structural keep/remove flags against the DENSE shape of a config. Channel c
// of a block survives only if both keep_channel[c] and its head's keep_head
// flag are set. Embedding/classifier flags exist for accounting completeness;
// the pruning pipeline never clears them.
struct StructureMask {
    struct Block {
        std::vector<std::uint8_t> keep_head;    // H
        std::vector<std::uint8_t> keep_channel; // d
        std::vector<std::uint8_t> keep_hidden;  // m
    };
    std::vector<Block> blocks;
    bool keep_embed = true;
    bool keep_classifier = true;

    static StructureMask all_keep(const VitConfig& cfg);
    std::size_t kept_channels(std::size_t block) const; // head-gated
    std::size_t kept_hidden(std::size_t block) const;
};

// Live parameter count (sum over actual tensors; structure metadata excluded).
std::size_t count_params(const ModelWeights& model);
// Analytic count of the parameters a masked dense model would retain. A block
// with nothing kept contributes nothing (its layer norms disappear with it);
// per-unit biases follow their owning column/head.
std::size_t count_params(const VitConfig& cfg, const StructureMask& mask);

// Analytic forward-pass FLOPs (2 per multiply-accumulate): patch embedding,
// per-block QKV/attention-scores/attention-values/projection/MLP, classifier
// on the class token. Softmax and layer norms excluded.
std::size_t count_flops(const VitConfig& cfg, std::size_t tokens);
std::size_t count_flops(const VitConfig& cfg, const StructureMask& mask, std::size_t tokens);

// Binary checkpoint, format pinned in the README (magic, u32 header fields,
// named row-major f64 tensor records). Round-trips bit-exactly.
void save_checkpoint(const ModelWeights& model, const std::string& path);
ModelWeights load_checkpoint(const std::string& path);
// Validates the loaded header against an expected config (dimension error).
ModelWeights load_checkpoint(const std::string& path, const VitConfig& expected);

} // namespace gohsp

#endif // GOHSP_VIT_HPP_
