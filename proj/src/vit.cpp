#include "gohsp/vit.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "gohsp/errors.hpp"
#include "gohsp/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O writes raw little-endian words");

namespace gohsp {

void VitConfig::validate() const {
    if (d == 0 || L == 0 || H == 0 || m == 0 || C == 0 || channels == 0)
        throw ConfigError("model dimensions must be positive");
    if (d % H != 0)
        throw ConfigError("embed dim " + std::to_string(d) + " not divisible by heads " +
                          std::to_string(H));
    if (patch_size == 0 || image_size % patch_size != 0)
        throw ConfigError("patch size must divide image size");
}

VitConfig desk_config() { return VitConfig{}; }

VitConfig vit_small_config() {
    // Shape whose dense count lands on 48.0M with a 10-class head.
    VitConfig cfg;
    cfg.image_size = 224;
    cfg.patch_size = 16;
    cfg.d = 768;
    cfg.L = 8;
    cfg.H = 8;
    cfg.m = 2304;
    cfg.C = 10;
    return cfg;
}

VitConfig deit_tiny_config() {
    VitConfig cfg;
    cfg.image_size = 224;
    cfg.patch_size = 16;
    cfg.d = 192;
    cfg.L = 12;
    cfg.H = 3;
    cfg.m = 768;
    cfg.C = 1000;
    return cfg;
}

std::size_t BlockWeights::total_channels() const {
    std::size_t c = 0;
    for (int w : head_channels) c += static_cast<std::size_t>(w);
    return c;
}

namespace {

// Allocates zero tensors of the right (possibly ragged) shapes.
BlockWeights make_block_shell(const VitConfig& cfg, std::vector<int> head_channels,
                              std::size_t hidden) {
    BlockWeights b;
    b.head_channels = std::move(head_channels);
    std::size_t ct = 0;
    for (int w : b.head_channels) {
        if (w < 0) throw ContractError("head channel width must be >= 0");
        ct += static_cast<std::size_t>(w);
    }
    const std::size_t d = cfg.d;
    b.ln1_g = Tensor({d});
    b.ln1_b = Tensor({d});
    b.w_qkv = Tensor({d, 3 * ct});
    b.b_qkv = Tensor({3 * ct});
    b.w_proj = Tensor({ct, d});
    b.b_proj = Tensor({d});
    b.ln2_g = Tensor({d});
    b.ln2_b = Tensor({d});
    b.w_fc1 = Tensor({d, hidden});
    b.b_fc1 = Tensor({hidden});
    b.w_fc2 = Tensor({hidden, d});
    b.b_fc2 = Tensor({d});
    return b;
}

ModelWeights make_model_shell(const VitConfig& cfg,
                              const std::vector<std::vector<int>>& head_channels,
                              const std::vector<std::size_t>& hidden) {
    ModelWeights w;
    w.cfg = cfg;
    w.patch_embed = Tensor({cfg.patch_dim(), cfg.d});
    w.patch_bias = Tensor({cfg.d});
    w.cls = Tensor({1, cfg.d});
    w.pos = Tensor({cfg.tokens(), cfg.d});
    for (std::size_t l = 0; l < cfg.L; ++l)
        w.blocks.push_back(make_block_shell(cfg, head_channels[l], hidden[l]));
    w.ln_f_g = Tensor({cfg.d});
    w.ln_f_b = Tensor({cfg.d});
    w.head_w = Tensor({cfg.d, cfg.C});
    w.head_b = Tensor({cfg.C});
    return w;
}

void check_shape(const Tensor& t, const std::vector<std::size_t>& want, const std::string& name) {
    if (t.shape() != want) {
        std::string msg = name + ": expected shape [";
        for (std::size_t i = 0; i < want.size(); ++i)
            msg += (i ? "," : "") + std::to_string(want[i]);
        msg += "], got " + t.shape_str();
        throw DimensionError(msg);
    }
}

} // namespace

void ModelWeights::validate() const {
    cfg.validate();
    if (blocks.size() != cfg.L) throw DimensionError("block count does not match config");
    check_shape(patch_embed, {cfg.patch_dim(), cfg.d}, "patch_embed.weight");
    check_shape(patch_bias, {cfg.d}, "patch_embed.bias");
    check_shape(cls, {1, cfg.d}, "cls_token");
    check_shape(pos, {cfg.tokens(), cfg.d}, "pos_embed");
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        const BlockWeights& b = blocks[l];
        if (b.head_channels.size() > cfg.H)
            throw DimensionError("block " + std::to_string(l) + ": more heads than config");
        if (b.head_channels.empty())
            throw DimensionError("block " + std::to_string(l) + ": no heads");
        std::size_t ct = 0;
        for (int w : b.head_channels) {
            if (w < 0) throw DimensionError("negative head channel width");
            if (static_cast<std::size_t>(w) > cfg.head_dim())
                throw DimensionError("head channel width exceeds head_dim");
            ct += static_cast<std::size_t>(w);
        }
        const std::string p = "blocks." + std::to_string(l) + ".";
        check_shape(b.ln1_g, {cfg.d}, p + "ln1.gain");
        check_shape(b.ln1_b, {cfg.d}, p + "ln1.bias");
        check_shape(b.w_qkv, {cfg.d, 3 * ct}, p + "attn.qkv.weight");
        check_shape(b.b_qkv, {3 * ct}, p + "attn.qkv.bias");
        check_shape(b.w_proj, {ct, cfg.d}, p + "attn.proj.weight");
        check_shape(b.b_proj, {cfg.d}, p + "attn.proj.bias");
        check_shape(b.ln2_g, {cfg.d}, p + "ln2.gain");
        check_shape(b.ln2_b, {cfg.d}, p + "ln2.bias");
        const std::size_t hidden = b.w_fc1.cols();
        if (hidden == 0 || hidden > cfg.m)
            throw DimensionError(p + "mlp hidden width out of range");
        check_shape(b.w_fc1, {cfg.d, hidden}, p + "mlp.fc1.weight");
        check_shape(b.b_fc1, {hidden}, p + "mlp.fc1.bias");
        check_shape(b.w_fc2, {hidden, cfg.d}, p + "mlp.fc2.weight");
        check_shape(b.b_fc2, {cfg.d}, p + "mlp.fc2.bias");
    }
    check_shape(ln_f_g, {cfg.d}, "norm.gain");
    check_shape(ln_f_b, {cfg.d}, "norm.bias");
    check_shape(head_w, {cfg.d, cfg.C}, "head.weight");
    check_shape(head_b, {cfg.C}, "head.bias");
}

std::vector<Tensor*> param_tensors(ModelWeights& model) {
    std::vector<Tensor*> out{&model.patch_embed, &model.patch_bias, &model.cls, &model.pos};
    for (BlockWeights& b : model.blocks) {
        out.push_back(&b.ln1_g);
        out.push_back(&b.ln1_b);
        out.push_back(&b.w_qkv);
        out.push_back(&b.b_qkv);
        out.push_back(&b.w_proj);
        out.push_back(&b.b_proj);
        out.push_back(&b.ln2_g);
        out.push_back(&b.ln2_b);
        out.push_back(&b.w_fc1);
        out.push_back(&b.b_fc1);
        out.push_back(&b.w_fc2);
        out.push_back(&b.b_fc2);
    }
    out.push_back(&model.ln_f_g);
    out.push_back(&model.ln_f_b);
    out.push_back(&model.head_w);
    out.push_back(&model.head_b);
    return out;
}

std::vector<const Tensor*> param_tensors(const ModelWeights& model) {
    auto mut = param_tensors(const_cast<ModelWeights&>(model));
    return std::vector<const Tensor*>(mut.begin(), mut.end());
}

std::vector<std::string> param_names(const ModelWeights& model) {
    std::vector<std::string> out{"patch_embed.weight", "patch_embed.bias", "cls_token",
                                 "pos_embed"};
    for (std::size_t l = 0; l < model.blocks.size(); ++l) {
        const std::string p = "blocks." + std::to_string(l) + ".";
        for (const char* s : {"ln1.gain", "ln1.bias", "attn.qkv.weight", "attn.qkv.bias",
                              "attn.proj.weight", "attn.proj.bias", "ln2.gain", "ln2.bias",
                              "mlp.fc1.weight", "mlp.fc1.bias", "mlp.fc2.weight", "mlp.fc2.bias"})
            out.push_back(p + s);
    }
    out.push_back("norm.gain");
    out.push_back("norm.bias");
    out.push_back("head.weight");
    out.push_back("head.bias");
    return out;
}

ModelWeights init_model(const VitConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::vector<std::vector<int>> hc(cfg.L,
                                     std::vector<int>(cfg.H, static_cast<int>(cfg.head_dim())));
    ModelWeights model = make_model_shell(cfg, hc, std::vector<std::size_t>(cfg.L, cfg.m));
    auto params = param_tensors(model);
    auto names = param_names(model);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string& name = names[i];
        const bool gaussian = name.ends_with(".weight") || name == "cls_token" ||
                              name == "pos_embed";
        const bool ones = name.ends_with(".gain");
        if (gaussian) {
            Rng rng = Rng::derive(seed, i);
            for (std::size_t j = 0; j < params[i]->numel(); ++j)
                params[i]->data()[j] = rng.normal(0.0, 0.02);
        } else if (ones) {
            for (std::size_t j = 0; j < params[i]->numel(); ++j) params[i]->data()[j] = 1.0;
        } // biases stay zero
    }
    return model;
}

ForwardPass forward(const ModelWeights& model, const Tensor& images,
                    const std::vector<int>* labels, HeadCapture* capture) {
    const VitConfig& cfg = model.cfg;
    if (images.cols() != cfg.channels * cfg.image_size * cfg.image_size)
        throw DimensionError("forward: image width " + std::to_string(images.cols()) +
                             " does not match config");
    const std::size_t batch = images.rows();
    const std::size_t tokens = cfg.tokens();
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));

    ForwardPass fp;
    Tape& t = fp.tape;
    auto cmodel = param_tensors(model);
    fp.params.reserve(cmodel.size());
    for (const Tensor* p : cmodel) fp.params.push_back(t.input(*p));

    // Parameter ids in enumeration order; see param_tensors for the layout.
    std::size_t k = 0;
    const auto pe = fp.params[k++], pb = fp.params[k++], cls = fp.params[k++],
               pos = fp.params[k++];

    auto img = t.input(images);
    auto x = t.add_bias(t.matmul(t.extract_patches(img, cfg.image_size, cfg.patch_size,
                                                   cfg.channels),
                                 pe),
                        pb);
    x = t.add_pos(t.prepend_cls(x, cls, batch), pos, batch);

    if (capture && capture->head_sums.empty()) {
        capture->head_sums.resize(cfg.L);
        for (std::size_t l = 0; l < cfg.L; ++l) {
            const auto& hc = model.blocks[l].head_channels;
            for (std::size_t h = 0; h < hc.size(); ++h)
                capture->head_sums[l].push_back(
                    Tensor({tokens, static_cast<std::size_t>(hc[h])}));
        }
    }

    for (std::size_t l = 0; l < cfg.L; ++l) {
        const BlockWeights& blk = model.blocks[l];
        const auto ln1_g = fp.params[k++], ln1_b = fp.params[k++], w_qkv = fp.params[k++],
                   b_qkv = fp.params[k++], w_proj = fp.params[k++], b_proj = fp.params[k++],
                   ln2_g = fp.params[k++], ln2_b = fp.params[k++], w_fc1 = fp.params[k++],
                   b_fc1 = fp.params[k++], w_fc2 = fp.params[k++], b_fc2 = fp.params[k++];

        auto h1 = t.layer_norm(x, ln1_g, ln1_b, kLnEps);
        auto qkv = t.add_bias(t.matmul(h1, w_qkv), b_qkv);
        auto probs = t.attention_probs(qkv, blk.head_channels, inv_sqrt_dh, batch, tokens);
        auto att = t.attention_output(probs, qkv, blk.head_channels, batch, tokens);
        if (capture) {
            // Reads only: sums each head's slice of the concatenated output
            // over the batch. The taped computation is untouched.
            const Tensor& av = t.value(att);
            auto& sums = capture->head_sums[l];
            if (sums.size() != blk.head_channels.size())
                throw ContractError("capture head count mismatch at block " + std::to_string(l));
            std::size_t off = 0;
            const std::size_t ct = blk.total_channels();
            for (std::size_t h = 0; h < blk.head_channels.size(); ++h) {
                const std::size_t ch = static_cast<std::size_t>(blk.head_channels[h]);
                if (sums[h].rows() != tokens || sums[h].cols() != ch)
                    throw ContractError("capture shape mismatch");
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t tok = 0; tok < tokens; ++tok)
                        for (std::size_t c = 0; c < ch; ++c)
                            sums[h].at(tok, c) += av.data()[(b * tokens + tok) * ct + off + c];
                off += ch;
            }
        }
        x = t.add(x, t.add_bias(t.matmul(att, w_proj), b_proj));

        auto h2 = t.layer_norm(x, ln2_g, ln2_b, kLnEps);
        auto f = t.gelu(t.add_bias(t.matmul(h2, w_fc1), b_fc1));
        x = t.add(x, t.add_bias(t.matmul(f, w_fc2), b_fc2));
    }
    if (capture) capture->samples += batch;

    const auto lng = fp.params[k++], lnb = fp.params[k++], hw = fp.params[k++],
               hb = fp.params[k++];
    auto final_ln = t.layer_norm(x, lng, lnb, kLnEps);
    fp.logits = t.add_bias(t.matmul(t.take_first_token(final_ln, batch, tokens), hw), hb);
    if (labels) {
        if (labels->size() != batch)
            throw DimensionError("forward: label count does not match batch");
        fp.loss = t.cross_entropy(fp.logits, *labels);
    }
    return fp;
}

Tensor predict(const ModelWeights& model, const Tensor& images) {
    ForwardPass fp = forward(model, images);
    return fp.tape.value(fp.logits);
}

double accuracy(const ModelWeights& model, const Tensor& images, const std::vector<int>& labels,
                std::size_t eval_batch) {
    if (images.rows() != labels.size()) throw DimensionError("accuracy: label count mismatch");
    if (eval_batch == 0) throw ContractError("accuracy: eval batch must be positive");
    std::size_t correct = 0;
    for (std::size_t start = 0; start < images.rows(); start += eval_batch) {
        const std::size_t stop = std::min(images.rows(), start + eval_batch);
        Tensor logits = predict(model, slice_rows(images, start, stop));
        for (std::size_t i = 0; i < logits.rows(); ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < logits.cols(); ++j)
                if (logits.at(i, j) > logits.at(i, best)) best = j; // ties keep lower index
            if (best == static_cast<std::size_t>(labels[start + i])) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(images.rows());
}

StructureMask StructureMask::all_keep(const VitConfig& cfg) {
    StructureMask m;
    m.blocks.resize(cfg.L);
    for (auto& b : m.blocks) {
        b.keep_head.assign(cfg.H, 1);
        b.keep_channel.assign(cfg.d, 1);
        b.keep_hidden.assign(cfg.m, 1);
    }
    return m;
}

std::size_t StructureMask::kept_channels(std::size_t block) const {
    const Block& b = blocks[block];
    const std::size_t dh = b.keep_channel.size() / b.keep_head.size();
    std::size_t n = 0;
    for (std::size_t c = 0; c < b.keep_channel.size(); ++c)
        if (b.keep_channel[c] && b.keep_head[c / dh]) ++n;
    return n;
}

std::size_t StructureMask::kept_hidden(std::size_t block) const {
    const Block& b = blocks[block];
    std::size_t n = 0;
    for (auto f : b.keep_hidden)
        if (f) ++n;
    return n;
}

std::size_t count_params(const ModelWeights& model) {
    std::size_t n = 0;
    for (const Tensor* t : param_tensors(model)) n += t->numel();
    return n;
}

std::size_t count_params(const VitConfig& cfg, const StructureMask& mask) {
    if (mask.blocks.size() != cfg.L) throw DimensionError("mask block count mismatch");
    std::size_t n = 0;
    if (mask.keep_embed)
        n += cfg.patch_dim() * cfg.d + cfg.d /*patch bias*/ + cfg.d /*cls*/ +
             cfg.tokens() * cfg.d /*pos*/ + 2 * cfg.d /*final norm*/;
    for (std::size_t l = 0; l < cfg.L; ++l) {
        const std::size_t kc = mask.kept_channels(l);
        const std::size_t km = mask.kept_hidden(l);
        if (kc > 0) n += 2 * cfg.d /*ln1*/ + cfg.d * 3 * kc + 3 * kc + kc * cfg.d + cfg.d;
        if (km > 0) n += 2 * cfg.d /*ln2*/ + cfg.d * km + km + km * cfg.d + cfg.d;
    }
    if (mask.keep_classifier) n += cfg.d * cfg.C + cfg.C;
    return n;
}

namespace {

std::size_t block_macs(std::size_t tokens, std::size_t d, std::size_t kc, std::size_t km) {
    return tokens * d * 3 * kc     // qkv projection
           + tokens * tokens * kc  // attention scores
           + tokens * tokens * kc  // attention-weighted values
           + tokens * kc * d       // output projection
           + 2 * tokens * d * km;  // fc1 + fc2
}

} // namespace

std::size_t count_flops(const VitConfig& cfg, std::size_t tokens) {
    return count_flops(cfg, StructureMask::all_keep(cfg), tokens);
}

std::size_t count_flops(const VitConfig& cfg, const StructureMask& mask, std::size_t tokens) {
    if (tokens < 1) throw ContractError("count_flops: tokens must be >= 1");
    if (mask.blocks.size() != cfg.L) throw DimensionError("mask block count mismatch");
    std::size_t macs = 0;
    if (mask.keep_embed) macs += (tokens - 1) * cfg.patch_dim() * cfg.d;
    for (std::size_t l = 0; l < cfg.L; ++l)
        macs += block_macs(tokens, cfg.d, mask.kept_channels(l), mask.kept_hidden(l));
    if (mask.keep_classifier) macs += cfg.d * cfg.C; // class token only
    return 2 * macs;
}

// --- checkpoint I/O ---------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'G', 'O', 'H', 'S', 'P', '0', '0', '1'};

void write_u32(std::ofstream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
}

void write_tensor(std::ofstream& f, const std::string& name, const Tensor& t) {
    const auto len = static_cast<std::uint16_t>(name.size());
    f.write(reinterpret_cast<const char*>(&len), 2);
    f.write(name.data(), len);
    const auto rank = static_cast<std::uint8_t>(t.rank());
    f.write(reinterpret_cast<const char*>(&rank), 1);
    for (std::size_t dim : t.shape()) write_u32(f, static_cast<std::uint32_t>(dim));
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

struct Reader {
    std::ifstream f;
    explicit Reader(const std::string& path) : f(path, std::ios::binary) {
        if (!f) throw DataError("cannot open checkpoint: " + path);
    }
    void raw(void* dst, std::size_t n) {
        f.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(f.gcount()) != n)
            throw FormatError("truncated checkpoint payload");
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, 4);
        return v;
    }
    bool at_eof() {
        return f.peek() == std::ifstream::traits_type::eof();
    }
};

} // namespace

void save_checkpoint(const ModelWeights& model, const std::string& path) {
    model.validate();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint: " + path);
    f.write(kMagic, 8);
    const VitConfig& c = model.cfg;
    for (std::size_t v : {c.image_size, c.patch_size, c.d, c.L, c.H, c.m, c.C})
        write_u32(f, static_cast<std::uint32_t>(v));
    write_u32(f, 0); // dtype tag: f64
    // Structure records first so a reader can size ragged blocks up front.
    for (std::size_t l = 0; l < model.blocks.size(); ++l) {
        const auto& hc = model.blocks[l].head_channels;
        Tensor t({hc.size()});
        for (std::size_t h = 0; h < hc.size(); ++h) t.data()[h] = static_cast<double>(hc[h]);
        write_tensor(f, "blocks." + std::to_string(l) + ".head_channels", t);
    }
    auto params = param_tensors(model);
    auto names = param_names(model);
    for (std::size_t i = 0; i < params.size(); ++i) write_tensor(f, names[i], *params[i]);
    if (!f) throw DataError("checkpoint write failed: " + path);
}

ModelWeights load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[8];
    r.raw(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError("bad checkpoint magic bytes");
    VitConfig cfg;
    cfg.image_size = r.u32();
    cfg.patch_size = r.u32();
    cfg.d = r.u32();
    cfg.L = r.u32();
    cfg.H = r.u32();
    cfg.m = r.u32();
    cfg.C = r.u32();
    if (const std::uint32_t dtype = r.u32(); dtype != 0)
        throw FormatError("unsupported checkpoint dtype tag " + std::to_string(dtype));
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
    }

    std::map<std::string, Tensor> records;
    while (!r.at_eof()) {
        std::uint16_t len;
        r.raw(&len, 2);
        std::string name(len, '\0');
        r.raw(name.data(), len);
        std::uint8_t rank;
        r.raw(&rank, 1);
        if (rank == 0 || rank > 4) throw FormatError("implausible tensor rank in checkpoint");
        std::vector<std::size_t> shape(rank);
        std::size_t numel = 1;
        for (std::size_t i = 0; i < rank; ++i) {
            shape[i] = r.u32();
            numel *= shape[i];
        }
        if (numel > (std::size_t{1} << 31)) throw FormatError("implausible tensor size");
        Tensor t(shape);
        r.raw(t.data(), numel * sizeof(double));
        if (!records.emplace(name, std::move(t)).second)
            throw FormatError("duplicate tensor record: " + name);
    }

    auto take = [&](const std::string& name) -> Tensor {
        auto it = records.find(name);
        if (it == records.end()) throw FormatError("missing tensor record: " + name);
        Tensor t = std::move(it->second);
        records.erase(it);
        return t;
    };

    std::vector<std::vector<int>> hc(cfg.L);
    std::vector<std::size_t> hidden(cfg.L);
    for (std::size_t l = 0; l < cfg.L; ++l) {
        Tensor t = take("blocks." + std::to_string(l) + ".head_channels");
        if (t.rank() != 1 || t.numel() == 0 || t.numel() > cfg.H)
            throw FormatError("corrupt head_channels record");
        for (std::size_t h = 0; h < t.numel(); ++h) {
            const double v = t.data()[h];
            if (v < 0 || v > static_cast<double>(cfg.head_dim()) ||
                v != static_cast<double>(static_cast<int>(v)))
                throw FormatError("corrupt head_channels value");
            hc[l].push_back(static_cast<int>(v));
        }
        auto it = records.find("blocks." + std::to_string(l) + ".mlp.fc1.weight");
        if (it == records.end())
            throw FormatError("missing tensor record: blocks." + std::to_string(l) +
                              ".mlp.fc1.weight");
        if (it->second.rank() != 2) throw FormatError("fc1 record must be rank 2");
        hidden[l] = it->second.cols();
    }

    ModelWeights model = make_model_shell(cfg, hc, hidden);
    auto params = param_tensors(model);
    auto names = param_names(model);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor t = take(names[i]);
        check_shape(t, params[i]->shape(), names[i]);
        ensure_finite(t, names[i].c_str());
        *params[i] = std::move(t);
    }
    if (!records.empty())
        throw FormatError("unexpected tensor record: " + records.begin()->first);
    model.validate();
    return model;
}

ModelWeights load_checkpoint(const std::string& path, const VitConfig& expected) {
    ModelWeights model = load_checkpoint(path);
    const VitConfig& g = model.cfg;
    if (g.image_size != expected.image_size || g.patch_size != expected.patch_size ||
        g.d != expected.d || g.L != expected.L || g.H != expected.H || g.m != expected.m ||
        g.C != expected.C)
        throw DimensionError("checkpoint header does not match the expected model config");
    return model;
}

} // namespace gohsp
