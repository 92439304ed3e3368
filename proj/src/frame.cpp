#include "tsvc/frame.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace tsvc {

ChromaFormat chroma_from_string(const std::string& s) {
    if (s == "400") return ChromaFormat::C400;
    if (s == "420") return ChromaFormat::C420;
    if (s == "422") return ChromaFormat::C422;
    if (s == "444") return ChromaFormat::C444;
    throw std::invalid_argument("unknown chroma format: " + s);
}

std::size_t chroma_plane_bytes(ChromaFormat fmt, int width, int height) {
    const std::size_t luma = static_cast<std::size_t>(width) * height;
    switch (fmt) {
        case ChromaFormat::C400: return 0;
        case ChromaFormat::C420: return luma / 2;
        case ChromaFormat::C422: return luma;
        case ChromaFormat::C444: return luma * 2;
    }
    return 0;
}

std::uint8_t Frame::at_clamped(int x, int y) const {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return at(x, y);
}

BlockGrid make_grid(int width, int height, int block_size) {
    if (block_size <= 0) throw std::invalid_argument("block size must be positive");
    if (width <= 0 || height <= 0) throw std::invalid_argument("frame dimensions must be positive");
    if (width % block_size != 0 || height % block_size != 0)
        throw std::invalid_argument("frame dimensions must be block-size multiples");
    BlockGrid grid;
    grid.block_size = block_size;
    grid.origins.reserve(static_cast<std::size_t>(width / block_size) * (height / block_size));
    for (int y = 0; y < height; y += block_size)
        for (int x = 0; x < width; x += block_size)
            grid.origins.emplace_back(x, y);
    return grid;
}

Frame pad_to_block_multiple(const Frame& f, int block_size) {
    if (block_size <= 0) throw std::invalid_argument("block size must be positive");
    const int pw = (f.width + block_size - 1) / block_size * block_size;
    const int ph = (f.height + block_size - 1) / block_size * block_size;
    // Display dims pass through, so padding an already-padded frame keeps the
    // original content region instead of promoting the padding to content.
    if (pw == f.width && ph == f.height) return f;
    Frame out(pw, ph);
    out.display_width = f.display_width;
    out.display_height = f.display_height;
    for (int y = 0; y < ph; ++y) {
        const int sy = std::min(y, f.height - 1);
        for (int x = 0; x < pw; ++x) out.at(x, y) = f.at(std::min(x, f.width - 1), sy);
    }
    return out;
}

Frame crop_to_display(const Frame& f) {
    if (f.display_width == f.width && f.display_height == f.height) return f;
    Frame out(f.display_width, f.display_height);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) out.at(x, y) = f.at(x, y);
    return out;
}

std::vector<Frame> load_raw_video(const std::string& path, int width, int height, int count,
                                  int block_size, ChromaFormat chroma) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("frame dimensions must be positive");
    if (count < 0) throw std::invalid_argument("frame count must be non-negative");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);

    const std::size_t luma_bytes = static_cast<std::size_t>(width) * height;
    const std::size_t skip_bytes = chroma_plane_bytes(chroma, width, height);

    std::vector<Frame> frames;
    frames.reserve(count);
    for (int i = 0; i < count; ++i) {
        Frame raw(width, height);
        in.read(reinterpret_cast<char*>(raw.samples.data()), static_cast<std::streamsize>(luma_bytes));
        if (static_cast<std::size_t>(in.gcount()) != luma_bytes)
            throw std::runtime_error("truncated input: failed reading frame " + std::to_string(i) + " of " + path);
        if (skip_bytes > 0) {
            in.seekg(static_cast<std::streamoff>(skip_bytes), std::ios::cur);
            if (i + 1 < count) {
                // Peek so a file that ends inside the chroma plane of the
                // last requested frame still loads.
                if (in.peek() == std::char_traits<char>::eof())
                    throw std::runtime_error("truncated input: failed reading frame " + std::to_string(i + 1) +
                                             " of " + path);
            }
        }
        frames.push_back(pad_to_block_multiple(raw, block_size));
    }
    return frames;
}

void write_raw_video(const std::string& path, const std::vector<Frame>& frames) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (const Frame& f : frames) {
        const Frame c = crop_to_display(f);
        out.write(reinterpret_cast<const char*>(c.samples.data()), static_cast<std::streamsize>(c.samples.size()));
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

double psnr(const Frame& a, const Frame& b) {
    if (a.width != b.width || a.height != b.height) throw std::invalid_argument("psnr: dimension mismatch");
    std::uint64_t sum_sq = 0;
    const std::size_t n = a.samples.size();
    for (std::size_t i = 0; i < n; ++i) {
        const int d = static_cast<int>(a.samples[i]) - static_cast<int>(b.samples[i]);
        sum_sq += static_cast<std::uint64_t>(d) * d;
    }
    if (sum_sq == 0) return std::numeric_limits<double>::infinity();
    const double mse = static_cast<double>(sum_sq) / static_cast<double>(n);
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace tsvc
