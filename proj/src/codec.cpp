#include "tsvc/codec.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

namespace tsvc {
namespace {

constexpr char kMagic[4] = {'T', 'S', 'V', 'C'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kFrameIntra = 0;
constexpr std::uint8_t kFrameInter = 1;

// ---------------------------------------------------------------------------
// Little-endian byte IO
// ---------------------------------------------------------------------------

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_i16(std::vector<std::uint8_t>& out, int v) { put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v))); }

struct ByteReader {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (size - pos < n) throw StreamError("unexpected end of stream");
    }
    std::uint8_t u8() {
        need(1);
        return data[pos++];
    }
    std::uint16_t u16() {
        need(2);
        const std::uint16_t v = static_cast<std::uint16_t>(data[pos] | (data[pos + 1] << 8));
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    int i16() { return static_cast<std::int16_t>(u16()); }
    const std::uint8_t* span(std::size_t n) {
        need(n);
        const std::uint8_t* p = data + pos;
        pos += n;
        return p;
    }
};

// ---------------------------------------------------------------------------
// Header fixed point
// ---------------------------------------------------------------------------

std::uint16_t q_to_fixed(double q, const char* name) {
    if (!(q > 0) || !std::isfinite(q)) throw std::invalid_argument(std::string("codec: ") + name + " must be positive");
    const long long fx = std::llround(q * 16.0);
    if (fx < 1 || fx > 0xffff)
        throw std::invalid_argument(std::string("codec: ") + name + " outside the representable range [1/16, 4095.9375]");
    return static_cast<std::uint16_t>(fx);
}

double q_from_fixed(std::uint16_t fx) { return fx / 16.0; }

std::uint16_t t_to_fixed(double t) {
    if (!(t >= 0) || t >= 1) throw std::invalid_argument("codec: t must lie in [0, 1)");
    return static_cast<std::uint16_t>(std::min<long long>(std::llround(t * 1024.0), 1023));
}

double t_from_fixed(std::uint16_t fx) { return fx / 1024.0; }

}  // namespace

// ---------------------------------------------------------------------------
// Worker pool: claims indices off an atomic counter; first exception wins.
// ---------------------------------------------------------------------------

void detail::parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, std::max(1, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr err;
    auto body = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(err_mutex);
                if (!err) err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

namespace {

// ---------------------------------------------------------------------------
// Shared reconstruction arithmetic. Every term the decoder adds up goes
// through here, and the encoder calls the same function with the same
// operands, so both sides produce identical doubles.
// ---------------------------------------------------------------------------

VectorX<double> dequantize_levels(const std::vector<std::int64_t>& levels, double q) {
    VectorX<double> v(static_cast<Eigen::Index>(levels.size()));
    for (std::size_t i = 0; i < levels.size(); ++i) v[static_cast<Eigen::Index>(i)] = dequantize<double>(levels[i], q);
    return v;
}

VectorX<double> assemble_reconstruction(int n, double mean, const MatrixX<double>& basis,
                                        const VectorX<double>& stage1, const MatrixX<double>& altered,
                                        const VectorX<double>& stage2) {
    VectorX<double> recon = VectorX<double>::Constant(n, mean);
    if (basis.cols() > 0) recon += basis * stage1;
    if (altered.cols() > 0) recon += altered * stage2;
    return recon;
}

MatrixX<double> rebuild_block_basis(const Frame& ref, int ox, int oy, const CodecConfig& cfg,
                                    const std::vector<int>& chosen) {
    return rebuild_orthonormal_basis<double>(build_atoms<double>(ref, ox, oy, cfg.range, cfg.block_size, chosen));
}

}  // namespace

void CodecConfig::validate() const {
    if (block_size < 4 || block_size > 64) throw std::invalid_argument("codec: block size must lie in [4, 64]");
    range.validate();
    if (range.hi != -range.lo - 1) throw std::invalid_argument("codec: search range must be [-r, r-1]");
    if (range.side() % 16 != 0) throw std::invalid_argument("codec: search window side must be a multiple of 16");
    if (range.side() > 1024) throw std::invalid_argument("codec: search range too large");
    q_to_fixed(q1, "q1");
    q_to_fixed(q2, "q2");
    t_to_fixed(t);
    if (!(epsilon_factor > 0) || !std::isfinite(epsilon_factor))
        throw std::invalid_argument("codec: epsilon factor must be positive");
    if (max_atoms < 0) throw std::invalid_argument("codec: max atoms must be non-negative");
    if (threads < 0) throw std::invalid_argument("codec: thread count must be non-negative");
}

CodecConfig CodecConfig::canonicalized() const {
    validate();
    CodecConfig c = *this;
    c.q1 = q_from_fixed(q_to_fixed(q1, "q1"));
    c.q2 = q_from_fixed(q_to_fixed(q2, "q2"));
    c.t = t_from_fixed(t_to_fixed(t));
    return c;
}

double EncodeResult::mean_psnr_db() const {
    if (frames.empty()) return 0.0;
    double sum = 0.0;
    for (const FrameStats& f : frames) sum += f.psnr_db;
    return sum / static_cast<double>(frames.size());
}

VectorX<double> extract_block(const Frame& f, int origin_x, int origin_y, int block_size) {
    VectorX<double> v(block_size * block_size);
    for (int y = 0; y < block_size; ++y)
        for (int x = 0; x < block_size; ++x)
            v[y * block_size + x] = static_cast<double>(f.at(origin_x + x, origin_y + y));
    return v;
}

void store_block(Frame& f, int origin_x, int origin_y, int block_size, const VectorX<double>& values) {
    for (int y = 0; y < block_size; ++y)
        for (int x = 0; x < block_size; ++x) {
            const long long r = std::llround(values[y * block_size + x]);
            f.at(origin_x + x, origin_y + y) = static_cast<std::uint8_t>(std::clamp<long long>(r, 0, 255));
        }
}

BlockCode encode_block_data(const VectorX<double>& block, const Frame* ref, int origin_x, int origin_y,
                            const CodecConfig& cfg, const MatrixX<double>& dct) {
    const int n = static_cast<int>(block.size());
    BlockCode out;
    BlockSyntax& syn = out.syntax;

    const double mean = block.sum() / n;
    syn.mean_level = quantize(mean, cfg.q1);
    const double mean_hat = dequantize<double>(syn.mean_level, cfg.q1);
    const VectorX<double> x = (block.array() - mean_hat).matrix();

    MatrixX<double> basis(n, 0);
    if (ref) {
        const Dictionary<double> dict = build_dictionary<double>(*ref, origin_x, origin_y, cfg.range, cfg.block_size);
        SolverConfig scfg;
        scfg.epsilon_sq = cfg.epsilon_sq();
        scfg.termination_ratio = cfg.t;
        scfg.max_atoms = std::min(cfg.max_atoms > 0 ? cfg.max_atoms : n, n);
        scfg.mean_tolerance = cfg.q1;  // quantized-mean removal leaves up to 5q1/6
        syn.chosen = eomp<double>(x, dict, scfg).chosen;

        // Atoms whose quantized coefficient lands on zero carry no signal and
        // are dropped. Each drop changes the replayed basis columns after it,
        // so coefficients are re-derived until the survivors are all nonzero.
        while (!syn.chosen.empty()) {
            basis = rebuild_block_basis(*ref, origin_x, origin_y, cfg, syn.chosen);
            std::vector<int> kept;
            syn.levels.clear();
            for (int j = 0; j < basis.cols(); ++j) {
                const std::int64_t level = quantize(x.dot(basis.col(j)), cfg.q1);
                if (level == 0) continue;
                kept.push_back(syn.chosen[static_cast<std::size_t>(j)]);
                syn.levels.push_back(level);
            }
            if (static_cast<int>(kept.size()) == basis.cols()) break;
            syn.chosen = std::move(kept);
        }
        if (syn.chosen.empty()) basis.resize(n, 0);
    }

    const VectorX<double> stage1 = dequantize_levels(syn.levels, cfg.q1);
    VectorX<double> residual = x;
    if (basis.cols() > 0) residual -= basis * stage1;

    const bool intra = ref == nullptr;
    const double stage2_q = intra ? cfg.q1 : cfg.q2;
    AlteredBasis<double> altered;
    if (intra || !cfg.one_stage) {
        altered = orthonormalize_against<double>(dct, basis);
        const VectorX<double> lam = project_residual(altered, residual);
        syn.stage2.assign(static_cast<std::size_t>(altered.count()), 0);
        bool any = false;
        for (int i = 0; i < altered.count(); ++i) {
            syn.stage2[static_cast<std::size_t>(i)] = quantize(lam[i], stage2_q);
            any = any || syn.stage2[static_cast<std::size_t>(i)] != 0;
        }
        if (!any) syn.stage2.clear();
    }

    const MatrixX<double> altered_used = syn.stage2.empty() ? MatrixX<double>(n, 0) : altered.vectors;
    const VectorX<double> stage2 = dequantize_levels(syn.stage2, stage2_q);
    out.recon = assemble_reconstruction(n, mean_hat, basis, stage1, altered_used, stage2);

    const BlockCodingConfig ecfg{cfg.range.side(), ref != nullptr};
    out.payload = encode_block(syn, ecfg, &out.stats);
    return out;
}

VectorX<double> decode_block_data(const std::uint8_t* data, std::size_t size, const Frame* ref, int origin_x,
                                  int origin_y, const CodecConfig& cfg, const MatrixX<double>& dct) {
    const int n = cfg.block_size * cfg.block_size;
    const BlockCodingConfig ecfg{cfg.range.side(), ref != nullptr};

    MatrixX<double> basis(n, 0);
    AlteredBasis<double> altered;
    bool have_basis = false;

    BlockSyntax syn;
    try {
        syn = decode_block(data, size, ecfg, [&](const BlockSyntax& partial) {
            if (ref && !partial.chosen.empty()) basis = rebuild_block_basis(*ref, origin_x, origin_y, cfg, partial.chosen);
            have_basis = true;
            altered = orthonormalize_against<double>(dct, basis);
            return altered.count();
        });
        if (!have_basis && ref && !syn.chosen.empty())
            basis = rebuild_block_basis(*ref, origin_x, origin_y, cfg, syn.chosen);
    } catch (const StreamError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw StreamError(std::string("invalid block syntax: ") + e.what());
    }

    const double stage2_q = ref ? cfg.q2 : cfg.q1;
    const double mean_hat = dequantize<double>(syn.mean_level, cfg.q1);
    const VectorX<double> stage1 = dequantize_levels(syn.levels, cfg.q1);
    const VectorX<double> stage2 = dequantize_levels(syn.stage2, stage2_q);
    const MatrixX<double> altered_used = syn.stage2.empty() ? MatrixX<double>(n, 0) : altered.vectors;
    return assemble_reconstruction(n, mean_hat, basis, stage1, altered_used, stage2);
}

EncodeResult encode_sequence(const std::vector<Frame>& frames, const CodecConfig& config) {
    if (frames.empty()) throw std::invalid_argument("encode_sequence: no frames");
    const CodecConfig cfg = config.canonicalized();

    std::vector<Frame> padded;
    padded.reserve(frames.size());
    for (const Frame& f : frames) {
        if (f.display_width != frames[0].display_width || f.display_height != frames[0].display_height)
            throw std::invalid_argument("encode_sequence: frame dimensions differ");
        padded.push_back(pad_to_block_multiple(f, cfg.block_size));
    }

    EncodeResult res;
    std::vector<std::uint8_t>& out = res.stream;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u8(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(frames[0].display_width));
    put_u32(out, static_cast<std::uint32_t>(frames[0].display_height));
    put_u16(out, static_cast<std::uint16_t>(cfg.block_size));
    put_u32(out, static_cast<std::uint32_t>(frames.size()));
    res.header_bits = 8 * out.size();

    const MatrixX<double> dct = dct_basis<double>(cfg.block_size);
    const BlockGrid grid = make_grid(padded[0].width, padded[0].height, cfg.block_size);
    const int blocks = static_cast<int>(grid.origins.size());

    for (std::size_t fi = 0; fi < padded.size(); ++fi) {
        const bool intra = fi == 0;
        const std::size_t frame_start = out.size();
        put_u8(out, intra ? kFrameIntra : kFrameInter);
        put_u16(out, q_to_fixed(cfg.q1, "q1"));
        put_u16(out, q_to_fixed(cfg.q2, "q2"));
        put_u16(out, t_to_fixed(cfg.t));
        put_i16(out, cfg.range.lo);
        put_i16(out, cfg.range.hi);

        const Frame& src = padded[fi];
        Frame recon(src.width, src.height);
        recon.display_width = src.display_width;
        recon.display_height = src.display_height;
        const Frame* refp = intra ? nullptr : &res.reconstruction[fi - 1];

        std::vector<std::vector<std::uint8_t>> payloads(static_cast<std::size_t>(blocks));
        std::vector<EntropyStats> stats(static_cast<std::size_t>(blocks));
        detail::parallel_for(blocks, cfg.threads, [&](int b) {
            const auto [ox, oy] = grid.origins[static_cast<std::size_t>(b)];
            BlockCode code = encode_block_data(extract_block(src, ox, oy, cfg.block_size), refp, ox, oy, cfg, dct);
            store_block(recon, ox, oy, cfg.block_size, code.recon);
            payloads[static_cast<std::size_t>(b)] = std::move(code.payload);
            stats[static_cast<std::size_t>(b)] = code.stats;
        });

        FrameStats fs;
        fs.intra = intra;
        for (int b = 0; b < blocks; ++b) {
            const auto& payload = payloads[static_cast<std::size_t>(b)];
            put_u32(out, static_cast<std::uint32_t>(payload.size()));
            out.insert(out.end(), payload.begin(), payload.end());
            fs.bins += stats[static_cast<std::size_t>(b)].bins;
            fs.estimated_bits += stats[static_cast<std::size_t>(b)].estimated_bits;
        }
        fs.bits = 8 * (out.size() - frame_start);
        fs.psnr_db = psnr(crop_to_display(src), crop_to_display(recon));
        res.frames.push_back(fs);
        res.reconstruction.push_back(std::move(recon));
    }
    return res;
}

DecodeResult decode_sequence(const std::vector<std::uint8_t>& stream, int threads) {
    ByteReader rd{stream.data(), stream.size()};
    const std::uint8_t* magic = rd.span(4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw StreamError("not a tsvc stream");
    if (rd.u8() != kVersion) throw StreamError("unsupported stream version");

    const std::uint32_t dw = rd.u32();
    const std::uint32_t dh = rd.u32();
    const int bs = rd.u16();
    const std::uint32_t frame_count = rd.u32();
    if (dw == 0 || dh == 0 || dw > 8192 || dh > 8192) throw StreamError("invalid frame dimensions");
    if (bs < 4 || bs > 64) throw StreamError("invalid block size");
    if (frame_count == 0 || frame_count > 16384) throw StreamError("invalid frame count");

    const int pw = (static_cast<int>(dw) + bs - 1) / bs * bs;
    const int ph = (static_cast<int>(dh) + bs - 1) / bs * bs;
    const BlockGrid grid = make_grid(pw, ph, bs);
    const int blocks = static_cast<int>(grid.origins.size());
    const MatrixX<double> dct = dct_basis<double>(bs);

    DecodeResult res;
    res.block_size = bs;
    res.frames.reserve(frame_count);
    for (std::uint32_t fi = 0; fi < frame_count; ++fi) {
        const std::uint8_t type = rd.u8();
        if (type != kFrameIntra && type != kFrameInter) throw StreamError("unknown frame type");
        if (type == kFrameInter && fi == 0) throw StreamError("stream does not open with an intra frame");

        CodecConfig cfg;
        cfg.block_size = bs;
        const std::uint16_t q1fx = rd.u16();
        const std::uint16_t q2fx = rd.u16();
        const std::uint16_t tfx = rd.u16();
        if (q1fx == 0 || q2fx == 0 || tfx > 1023) throw StreamError("invalid frame quantizer header");
        cfg.q1 = q_from_fixed(q1fx);
        cfg.q2 = q_from_fixed(q2fx);
        cfg.t = t_from_fixed(tfx);
        cfg.range.lo = rd.i16();
        cfg.range.hi = rd.i16();
        try {
            cfg.validate();
        } catch (const std::invalid_argument& e) {
            throw StreamError(std::string("invalid frame header: ") + e.what());
        }

        std::vector<std::pair<const std::uint8_t*, std::size_t>> spans;
        spans.reserve(static_cast<std::size_t>(blocks));
        for (int b = 0; b < blocks; ++b) {
            const std::uint32_t len = rd.u32();
            if (len < 4) throw StreamError("block payload too short");
            spans.emplace_back(rd.span(len), len);
        }

        Frame recon(pw, ph);
        recon.display_width = static_cast<int>(dw);
        recon.display_height = static_cast<int>(dh);
        const Frame* refp = type == kFrameInter ? &res.frames[fi - 1] : nullptr;
        detail::parallel_for(blocks, threads, [&](int b) {
            const auto [ox, oy] = grid.origins[static_cast<std::size_t>(b)];
            const auto [data, size] = spans[static_cast<std::size_t>(b)];
            store_block(recon, ox, oy, bs, decode_block_data(data, size, refp, ox, oy, cfg, dct));
        });
        res.frames.push_back(std::move(recon));
    }
    return res;
}

}  // namespace tsvc
