#include "tsvc/entropy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>

namespace tsvc {

void ArithmeticEncoder::track(std::uint32_t p1, int bit) {
    ++bins_;
    const double p = bit ? static_cast<double>(p1) : static_cast<double>(kProbOne - p1);
    est_bits_ -= std::log2(p / static_cast<double>(kProbOne));
}

namespace {

// ---------------------------------------------------------------------------
// Binarizations
// ---------------------------------------------------------------------------

// Truncated unary with one adaptive context per bin position; positions past
// the family reuse its last context.
Context& at_bin(std::vector<Context>& family, std::int64_t bin) {
    const auto last = static_cast<std::int64_t>(family.size()) - 1;
    return family[static_cast<std::size_t>(std::min(bin, last))];
}

void encode_tu(ArithmeticEncoder& enc, std::vector<Context>& family, std::int64_t v, std::int64_t cap) {
    for (std::int64_t i = 0; i < v; ++i) enc.encode(at_bin(family, i), 1);
    if (v < cap) enc.encode(at_bin(family, v), 0);
}

std::int64_t decode_tu(ArithmeticDecoder& dec, std::vector<Context>& family, std::int64_t cap) {
    std::int64_t v = 0;
    while (v < cap && dec.decode(at_bin(family, v))) ++v;
    return v;
}

// k-th order exp-Golomb, bypass bins, with the escape-style prefix: each
// leading 1 absorbs 1<<k values and bumps k.
void encode_egk(ArithmeticEncoder& enc, std::uint64_t u, int k) {
    while (u >= (std::uint64_t{1} << k)) {
        enc.encode_bypass(1);
        u -= std::uint64_t{1} << k;
        ++k;
    }
    enc.encode_bypass(0);
    for (int i = k - 1; i >= 0; --i) enc.encode_bypass(static_cast<int>((u >> i) & 1));
}

std::uint64_t decode_egk(ArithmeticDecoder& dec, int k) {
    std::uint64_t base = 0;
    while (dec.decode_bypass()) {
        base += std::uint64_t{1} << k;
        if (++k > 40) throw StreamError("entropy: exp-golomb prefix overflow");
    }
    std::uint64_t suffix = 0;
    for (int i = 0; i < k; ++i) suffix = (suffix << 1) | static_cast<std::uint64_t>(dec.decode_bypass());
    return base + suffix;
}

// Signed-to-unsigned interleave: 0, -1, +1, -2, +2, ... -> 0, 1, 2, 3, 4, ...
std::uint64_t interleave(std::int64_t d) {
    return d < 0 ? 2 * static_cast<std::uint64_t>(-d) - 1 : 2 * static_cast<std::uint64_t>(d);
}

std::int64_t deinterleave(std::uint64_t u) {
    return (u & 1) ? -static_cast<std::int64_t>((u + 1) / 2) : static_cast<std::int64_t>(u / 2);
}

// Unsigned magnitude: truncated-unary prefix up to 4 (context coded), then an
// EG0 bypass suffix for the excess.
void encode_mag(ArithmeticEncoder& enc, std::vector<Context>& family, std::uint64_t u) {
    const auto prefix = static_cast<std::int64_t>(std::min<std::uint64_t>(u, 4));
    encode_tu(enc, family, prefix, 4);
    if (u >= 4) encode_egk(enc, u - 4, 0);
}

std::uint64_t decode_mag(ArithmeticDecoder& dec, std::vector<Context>& family) {
    const auto prefix = static_cast<std::uint64_t>(decode_tu(dec, family, 4));
    return prefix < 4 ? prefix : 4 + decode_egk(dec, 0);
}

// ---------------------------------------------------------------------------
// Contexts: one fresh set per block payload, everything starting at p=1/2.
// ---------------------------------------------------------------------------

struct BlockContexts {
    std::vector<Context> top_sig;                 // per top-level map cell
    std::vector<Context> mid_count, mid_run;      // mid-layer 4x4 patterns
    std::vector<Context> leaf_count, leaf_run;    // atom-layer 4x4 patterns
    std::vector<std::vector<Context>> order_run;  // per bit-plane
    std::vector<Context> level_pred, level_first;
    Context cbf;
    std::vector<Context> last_pos;
    std::vector<Context> sig, gt1, gt2;

    BlockContexts(int map_side, bool inter) {
        if (inter) {
            const int top = map_side / 16;
            top_sig.resize(static_cast<std::size_t>(top) * top);
        }
        mid_count.resize(3);
        mid_run.resize(3);
        leaf_count.resize(3);
        leaf_run.resize(3);
        order_run.assign(8, std::vector<Context>(3));
        level_pred.resize(3);
        level_first.resize(3);
        last_pos.resize(8);
        sig.resize(3);
        gt1.resize(2);
        gt2.resize(1);
    }
};

// ---------------------------------------------------------------------------
// Significance map: three layers of 4x the side each. A top cell spans 16x16
// atoms and gets one bin; inside a significant cell, each 4x4 pattern (mid
// cells within a top cell, atoms within a mid cell) is coded as a population
// count, the first set position, and the zero-runs between the rest.
// ---------------------------------------------------------------------------

// (count, first, runs) coding of one 4x4 binary pattern holding `positions`
// (row-major, ascending, non-empty).
void encode_pattern(ArithmeticEncoder& enc, std::vector<Context>& count_family, std::vector<Context>& run_family,
                    const std::vector<int>& positions) {
    const auto count = static_cast<std::int64_t>(positions.size());
    encode_tu(enc, count_family, count, 16);
    for (int b = 3; b >= 0; --b) enc.encode_bypass((positions[0] >> b) & 1);
    for (std::int64_t j = 2; j <= count; ++j) {
        const int prev = positions[static_cast<std::size_t>(j - 2)];
        const int cur = positions[static_cast<std::size_t>(j - 1)];
        const std::int64_t cap = 14 - prev - (count - j);
        encode_tu(enc, run_family, cur - prev - 1, cap);
    }
}

std::vector<int> decode_pattern(ArithmeticDecoder& dec, std::vector<Context>& count_family,
                                std::vector<Context>& run_family) {
    const std::int64_t count = decode_tu(dec, count_family, 16);
    if (count < 1) throw StreamError("significance map: empty pattern in a significant cell");
    int first = 0;
    for (int b = 3; b >= 0; --b) first = (first << 1) | dec.decode_bypass();
    if (first + count - 1 > 15) throw StreamError("significance map: pattern overflows its cell");
    std::vector<int> positions{first};
    for (std::int64_t j = 2; j <= count; ++j) {
        const std::int64_t cap = 14 - positions.back() - (count - j);
        positions.push_back(positions.back() + 1 + static_cast<int>(decode_tu(dec, run_family, cap)));
    }
    return positions;
}

struct MapCoords {
    int top, mid, leaf;  // top cell index, 4x4 position within it, 4x4 position within that
};

MapCoords map_coords(int atom, int side) {
    const int row = atom / side;
    const int col = atom % side;
    const int top_side = side / 16;
    MapCoords c;
    c.top = (row / 16) * top_side + col / 16;
    c.mid = ((row % 16) / 4) * 4 + (col % 16) / 4;
    c.leaf = (row % 4) * 4 + col % 4;
    return c;
}

int atom_of(int top, int mid, int leaf, int side) {
    const int top_side = side / 16;
    const int row = (top / top_side) * 16 + (mid / 4) * 4 + leaf / 4;
    const int col = (top % top_side) * 16 + (mid % 4) * 4 + leaf % 4;
    return row * side + col;
}

void encode_map(ArithmeticEncoder& enc, BlockContexts& ctx, const std::vector<int>& sorted_atoms, int side) {
    const int top_side = side / 16;
    const int top_cells = top_side * top_side;
    // Bucket the chosen atoms by top cell and mid cell.
    std::vector<std::vector<std::pair<int, int>>> per_top(static_cast<std::size_t>(top_cells));
    for (int a : sorted_atoms) {
        const MapCoords c = map_coords(a, side);
        per_top[static_cast<std::size_t>(c.top)].emplace_back(c.mid, c.leaf);
    }
    for (int t = 0; t < top_cells; ++t) {
        auto& entries = per_top[static_cast<std::size_t>(t)];
        enc.encode(ctx.top_sig[static_cast<std::size_t>(t)], entries.empty() ? 0 : 1);
        if (entries.empty()) continue;
        std::sort(entries.begin(), entries.end());
        std::vector<int> mids;
        for (const auto& [mid, leaf] : entries)
            if (mids.empty() || mids.back() != mid) mids.push_back(mid);
        encode_pattern(enc, ctx.mid_count, ctx.mid_run, mids);
        for (int mid : mids) {
            std::vector<int> leaves;
            for (const auto& [m, leaf] : entries)
                if (m == mid) leaves.push_back(leaf);
            encode_pattern(enc, ctx.leaf_count, ctx.leaf_run, leaves);
        }
    }
}

std::vector<int> decode_map(ArithmeticDecoder& dec, BlockContexts& ctx, int side) {
    const int top_side = side / 16;
    const int top_cells = top_side * top_side;
    std::vector<int> atoms;
    for (int t = 0; t < top_cells; ++t) {
        if (!dec.decode(ctx.top_sig[static_cast<std::size_t>(t)])) continue;
        const std::vector<int> mids = decode_pattern(dec, ctx.mid_count, ctx.mid_run);
        for (int mid : mids) {
            const std::vector<int> leaves = decode_pattern(dec, ctx.leaf_count, ctx.leaf_run);
            for (int leaf : leaves) atoms.push_back(atom_of(t, mid, leaf, side));
        }
    }
    // The hierarchical scan is not globally raster-ordered; the order payload
    // pairs ranks with set bits in raster order, so restore it.
    std::sort(atoms.begin(), atoms.end());
    return atoms;
}

// ---------------------------------------------------------------------------
// Selection order: bit-planes of each chosen atom's order value, most
// significant first. Within a plane the number of ones is implied by the
// atom count, so only the zero-runs before each one are sent, capped by
// feasibility.
// ---------------------------------------------------------------------------

void encode_orders(ArithmeticEncoder& enc, BlockContexts& ctx, const std::vector<int>& orders) {
    const int k = static_cast<int>(orders.size());
    const int width = std::bit_width(static_cast<unsigned>(k - 1));
    for (int p = width - 1; p >= 0; --p) {
        auto& family = ctx.order_run[static_cast<std::size_t>(std::min(p, 7))];
        int remaining = plane_ones(k, p);
        int cursor = 0;
        for (int i = 0; i < k && remaining > 0; ++i) {
            if (!((orders[static_cast<std::size_t>(i)] >> p) & 1)) continue;
            encode_tu(enc, family, i - cursor, k - cursor - remaining);
            cursor = i + 1;
            --remaining;
        }
    }
}

std::vector<int> decode_orders(ArithmeticDecoder& dec, BlockContexts& ctx, int k) {
    std::vector<int> orders(static_cast<std::size_t>(k), 0);
    const int width = std::bit_width(static_cast<unsigned>(k - 1));
    for (int p = width - 1; p >= 0; --p) {
        auto& family = ctx.order_run[static_cast<std::size_t>(std::min(p, 7))];
        int remaining = plane_ones(k, p);
        int cursor = 0;
        while (remaining > 0) {
            const auto run = decode_tu(dec, family, k - cursor - remaining);
            const int pos = cursor + static_cast<int>(run);
            orders[static_cast<std::size_t>(pos)] |= 1 << p;
            cursor = pos + 1;
            --remaining;
        }
    }
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(k), 0);
    for (int o : orders) {
        if (o < 0 || o >= k || seen[static_cast<std::size_t>(o)])
            throw StreamError("atom orders do not form a permutation");
        seen[static_cast<std::size_t>(o)] = 1;
    }
    return orders;
}

// ---------------------------------------------------------------------------
// Stage-1 levels: coded in reverse selection order so each magnitude predicts
// the next (they tend to grow toward the first pick); the first-chosen atom
// closes with its own family, offset by the nonzero guarantee.
// ---------------------------------------------------------------------------

void encode_levels(ArithmeticEncoder& enc, BlockContexts& ctx, const std::vector<std::int64_t>& levels) {
    const auto k = static_cast<int>(levels.size());
    std::int64_t pred = 1;
    for (int j = k - 1; j >= 1; --j) {
        const std::int64_t mag = std::abs(levels[static_cast<std::size_t>(j)]);
        encode_mag(enc, ctx.level_pred, interleave(mag - pred));
        enc.encode_bypass(levels[static_cast<std::size_t>(j)] < 0);
        pred = mag;
    }
    encode_mag(enc, ctx.level_first, static_cast<std::uint64_t>(std::abs(levels[0]) - 1));
    enc.encode_bypass(levels[0] < 0);
}

std::vector<std::int64_t> decode_levels(ArithmeticDecoder& dec, BlockContexts& ctx, int k) {
    std::vector<std::int64_t> levels(static_cast<std::size_t>(k), 0);
    std::int64_t pred = 1;
    for (int j = k - 1; j >= 1; --j) {
        const std::int64_t mag = pred + deinterleave(decode_mag(dec, ctx.level_pred));
        if (mag < 1) throw StreamError("stage-1 level decoded as zero");
        levels[static_cast<std::size_t>(j)] = dec.decode_bypass() ? -mag : mag;
        pred = mag;
    }
    const auto mag0 = static_cast<std::int64_t>(decode_mag(dec, ctx.level_first)) + 1;
    levels[0] = dec.decode_bypass() ? -mag0 : mag0;
    return levels;
}

// ---------------------------------------------------------------------------
// Stage-2 coefficients: coded-block flag, last significant position, then a
// significance/greater1/greater2/remainder cascade per position.
// ---------------------------------------------------------------------------

int sig_ctx_of(std::int64_t i) { return i == 0 ? 0 : (i < 16 ? 1 : 2); }

void encode_stage2(ArithmeticEncoder& enc, BlockContexts& ctx, const std::vector<std::int64_t>& lam) {
    std::int64_t last = -1;
    for (std::size_t i = 0; i < lam.size(); ++i)
        if (lam[i] != 0) last = static_cast<std::int64_t>(i);
    enc.encode(ctx.cbf, last >= 0 ? 1 : 0);
    if (last < 0) return;

    encode_tu(enc, ctx.last_pos, last, static_cast<std::int64_t>(lam.size()) - 1);
    for (std::int64_t i = 0; i <= last; ++i) {
        const std::int64_t v = lam[static_cast<std::size_t>(i)];
        enc.encode(ctx.sig[static_cast<std::size_t>(sig_ctx_of(i))], v != 0 ? 1 : 0);
        if (v == 0) continue;
        const std::int64_t mag = std::abs(v);
        enc.encode(ctx.gt1[i == 0 ? 0 : 1], mag > 1 ? 1 : 0);
        if (mag > 1) {
            enc.encode(ctx.gt2[0], mag > 2 ? 1 : 0);
            if (mag > 2) encode_egk(enc, static_cast<std::uint64_t>(mag - 3), 0);
        }
        enc.encode_bypass(v < 0);
    }
}

std::vector<std::int64_t> decode_stage2_body(ArithmeticDecoder& dec, BlockContexts& ctx, int count) {
    std::vector<std::int64_t> lam(static_cast<std::size_t>(count), 0);
    const std::int64_t last = decode_tu(dec, ctx.last_pos, static_cast<std::int64_t>(count) - 1);
    for (std::int64_t i = 0; i <= last; ++i) {
        if (!dec.decode(ctx.sig[static_cast<std::size_t>(sig_ctx_of(i))])) {
            if (i == last) throw StreamError("stage-2 last coefficient signalled zero");
            continue;
        }
        std::int64_t mag = 1;
        if (dec.decode(ctx.gt1[i == 0 ? 0 : 1])) {
            mag = 2;
            if (dec.decode(ctx.gt2[0])) mag = 3 + static_cast<std::int64_t>(decode_egk(dec, 0));
        }
        lam[static_cast<std::size_t>(i)] = dec.decode_bypass() ? -mag : mag;
    }
    return lam;
}

void validate_config(const BlockCodingConfig& cfg) {
    if (cfg.inter && (cfg.map_side <= 0 || cfg.map_side % 16 != 0))
        throw std::invalid_argument("entropy: map side must be a positive multiple of 16");
}

}  // namespace

std::vector<std::uint8_t> encode_block(const BlockSyntax& syntax, const BlockCodingConfig& cfg,
                                       EntropyStats* stats) {
    validate_config(cfg);
    if (!cfg.inter && !syntax.chosen.empty())
        throw std::invalid_argument("entropy: intra block carries stage-1 syntax");
    if (syntax.chosen.size() != syntax.levels.size())
        throw std::invalid_argument("entropy: chosen/levels size mismatch");
    for (std::int64_t level : syntax.levels)
        if (level == 0) throw std::invalid_argument("entropy: zero stage-1 level");

    std::vector<std::uint8_t> out;
    ArithmeticEncoder enc(out);
    BlockContexts ctx(cfg.map_side, cfg.inter);

    encode_egk(enc, interleave(syntax.mean_level), 2);
    if (cfg.inter) {
        const int k = syntax.atom_count();
        std::vector<int> sorted = syntax.chosen;
        std::sort(sorted.begin(), sorted.end());
        const int atom_limit = cfg.map_side * cfg.map_side;
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            if (sorted[i] < 0 || sorted[i] >= atom_limit)
                throw std::invalid_argument("entropy: atom index outside the map");
            if (i > 0 && sorted[i] == sorted[i - 1])
                throw std::invalid_argument("entropy: duplicate atom index");
        }
        encode_map(enc, ctx, sorted, cfg.map_side);
        if (k >= 2) {
            std::vector<int> orders(static_cast<std::size_t>(k), 0);
            for (int pos = 0; pos < k; ++pos) {
                const auto it = std::lower_bound(sorted.begin(), sorted.end(), syntax.chosen[static_cast<std::size_t>(pos)]);
                orders[static_cast<std::size_t>(it - sorted.begin())] = pos;
            }
            encode_orders(enc, ctx, orders);
        }
        if (k >= 1) encode_levels(enc, ctx, syntax.levels);
    }
    encode_stage2(enc, ctx, syntax.stage2);
    enc.finish();

    if (stats) {
        stats->bins += enc.bins();
        stats->estimated_bits += enc.estimated_bits();
    }
    return out;
}

std::vector<std::uint8_t> encode_map_only(const std::vector<int>& atoms, int map_side, EntropyStats* stats) {
    validate_config(BlockCodingConfig{map_side, true});
    std::vector<int> sorted = atoms;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i] < 0 || sorted[i] >= map_side * map_side)
            throw std::invalid_argument("entropy: atom index outside the map");
        if (i > 0 && sorted[i] == sorted[i - 1]) throw std::invalid_argument("entropy: duplicate atom index");
    }
    std::vector<std::uint8_t> out;
    ArithmeticEncoder enc(out);
    BlockContexts ctx(map_side, true);
    encode_map(enc, ctx, sorted, map_side);
    enc.finish();
    if (stats) {
        stats->bins += enc.bins();
        stats->estimated_bits += enc.estimated_bits();
    }
    return out;
}

std::vector<int> decode_map_only(const std::uint8_t* data, std::size_t size, int map_side) {
    validate_config(BlockCodingConfig{map_side, true});
    ArithmeticDecoder dec(data, size);
    BlockContexts ctx(map_side, true);
    return decode_map(dec, ctx, map_side);
}

BlockSyntax decode_block(const std::uint8_t* data, std::size_t size, const BlockCodingConfig& cfg,
                         const std::function<int(const BlockSyntax&)>& stage2_count) {
    validate_config(cfg);
    ArithmeticDecoder dec(data, size);
    BlockContexts ctx(cfg.map_side, cfg.inter);

    BlockSyntax syn;
    syn.mean_level = deinterleave(decode_egk(dec, 2));
    if (cfg.inter) {
        const std::vector<int> sorted = decode_map(dec, ctx, cfg.map_side);
        const int k = static_cast<int>(sorted.size());
        std::vector<int> orders(static_cast<std::size_t>(k), 0);
        if (k >= 2) orders = decode_orders(dec, ctx, k);
        syn.chosen.resize(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i)
            syn.chosen[static_cast<std::size_t>(orders[static_cast<std::size_t>(i)])] = sorted[static_cast<std::size_t>(i)];
        if (k >= 1) syn.levels = decode_levels(dec, ctx, k);
    }
    if (dec.decode(ctx.cbf)) {
        const int count = stage2_count(syn);
        if (count < 1) throw StreamError("stage-2 coefficients signalled for an empty basis");
        syn.stage2 = decode_stage2_body(dec, ctx, count);
    }
    return syn;
}

}  // namespace tsvc
