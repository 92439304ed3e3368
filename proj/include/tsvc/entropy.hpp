#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsvc {

// Raised when a bitstream cannot be parsed back into valid syntax.
struct StreamError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Binary arithmetic coder. Carry-less range coder over single bins: the
// interval is split at lo + (hi-lo) * p(1), renormalized a byte at a time
// whenever the top byte of lo and hi agree.
// ---------------------------------------------------------------------------

inline constexpr int kProbBits = 15;
inline constexpr std::uint32_t kProbOne = 1u << kProbBits;
inline constexpr std::uint32_t kProbHalf = kProbOne >> 1;
inline constexpr int kAdaptShift = 5;

// Adaptive binary context: probability of coding a 1, as a kProbBits-wide
// fixed-point fraction. The shift update keeps it strictly inside (0, 1).
struct Context {
    std::uint32_t p1 = kProbHalf;

    void adapt(int bit) {
        if (bit)
            p1 += (kProbOne - p1) >> kAdaptShift;
        else
            p1 -= p1 >> kAdaptShift;
    }
};

struct EntropyStats {
    std::uint64_t bins = 0;
    double estimated_bits = 0.0;  // -log2 of the coded probability mass
};

class ArithmeticEncoder {
public:
    explicit ArithmeticEncoder(std::vector<std::uint8_t>& sink) : out_(&sink) {}

    void encode(Context& ctx, int bit) {
        track(ctx.p1, bit);
        split(ctx.p1, bit);
        ctx.adapt(bit);
        renorm();
    }

    void encode_bypass(int bit) {
        track(kProbHalf, bit);
        split(kProbHalf, bit);
        renorm();
    }

    // Flushes the remaining interval state; the encoder must not be reused.
    void finish() {
        for (int i = 0; i < 4; ++i) {
            out_->push_back(static_cast<std::uint8_t>(lo_ >> 24));
            lo_ <<= 8;
        }
    }

    std::uint64_t bins() const { return bins_; }
    double estimated_bits() const { return est_bits_; }

private:
    void split(std::uint32_t p1, int bit) {
        const std::uint32_t x =
            lo_ + static_cast<std::uint32_t>((static_cast<std::uint64_t>(hi_ - lo_) * p1) >> kProbBits);
        if (bit)
            hi_ = x;
        else
            lo_ = x + 1;
    }

    void renorm() {
        while ((lo_ ^ hi_) < (1u << 24)) {
            out_->push_back(static_cast<std::uint8_t>(lo_ >> 24));
            lo_ <<= 8;
            hi_ = (hi_ << 8) | 0xff;
        }
    }

    void track(std::uint32_t p1, int bit);

    std::vector<std::uint8_t>* out_;
    std::uint32_t lo_ = 0;
    std::uint32_t hi_ = 0xffffffffu;
    std::uint64_t bins_ = 0;
    double est_bits_ = 0.0;
};

class ArithmeticDecoder {
public:
    ArithmeticDecoder(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {
        for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
    }

    int decode(Context& ctx) {
        const int bit = split(ctx.p1);
        ctx.adapt(bit);
        renorm();
        return bit;
    }

    int decode_bypass() {
        const int bit = split(kProbHalf);
        renorm();
        return bit;
    }

private:
    int split(std::uint32_t p1) {
        const std::uint32_t x =
            lo_ + static_cast<std::uint32_t>((static_cast<std::uint64_t>(hi_ - lo_) * p1) >> kProbBits);
        if (code_ <= x) {
            hi_ = x;
            return 1;
        }
        lo_ = x + 1;
        return 0;
    }

    void renorm() {
        while ((lo_ ^ hi_) < (1u << 24)) {
            code_ = (code_ << 8) | next_byte();
            lo_ <<= 8;
            hi_ = (hi_ << 8) | 0xff;
        }
    }

    // Reads past the payload decode as zero: a well-formed stream never
    // depends on them, and corrupt ones fail the syntax checks instead.
    std::uint8_t next_byte() { return pos_ < size_ ? data_[pos_++] : 0; }

    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
    std::uint32_t lo_ = 0;
    std::uint32_t hi_ = 0xffffffffu;
    std::uint32_t code_ = 0;
};

// Number of values in {0, ..., count-1} with bit `plane` set. The selection
// orders form a permutation of exactly that range, so both sides of the
// bit-plane coder derive each plane's population from the atom count alone.
inline int plane_ones(int count, int plane) {
    const int full = (count >> (plane + 1)) << plane;
    const int partial = (count & ((1 << (plane + 1)) - 1)) - (1 << plane);
    return full + (partial > 0 ? partial : 0);
}

// ---------------------------------------------------------------------------
// Block syntax
// ---------------------------------------------------------------------------

// Everything the decoder needs to rebuild one block, before any math.
struct BlockSyntax {
    std::int64_t mean_level = 0;
    std::vector<int> chosen;                // atom indices in selection order
    std::vector<std::int64_t> levels;       // stage-1 levels, selection order, all nonzero
    std::vector<std::int64_t> stage2;       // altered-basis levels; empty means cbf=0

    int atom_count() const { return static_cast<int>(chosen.size()); }
};

struct BlockCodingConfig {
    int map_side = 48;  // dictionary search-window side; multiple of 16
    bool inter = true;  // false: stage-1 syntax absent (intra block)
};

// Serializes one block payload with a fresh set of contexts. When stage2 is
// non-empty its length must equal the altered-basis size for this block.
std::vector<std::uint8_t> encode_block(const BlockSyntax& syntax, const BlockCodingConfig& cfg,
                                       EntropyStats* stats = nullptr);

// Parses one block payload. stage2_count is consulted only when the coded
// block flag is set: it receives the stage-1 syntax decoded so far and must
// return the altered-basis size (the caller owns that reconstruction).
// Throws StreamError when the payload is not valid syntax.
BlockSyntax decode_block(const std::uint8_t* data, std::size_t size, const BlockCodingConfig& cfg,
                         const std::function<int(const BlockSyntax&)>& stage2_count);

// Significance map coded by itself (fresh contexts): rate measurements and
// targeted round-trip tests. Atom order does not matter on encode; decode
// returns ascending indices.
std::vector<std::uint8_t> encode_map_only(const std::vector<int>& atoms, int map_side,
                                          EntropyStats* stats = nullptr);
std::vector<int> decode_map_only(const std::uint8_t* data, std::size_t size, int map_side);

}  // namespace tsvc
