#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tsvc {

// Chroma layout of a raw planar input file. Only the luma plane is coded;
// chroma planes are skipped on read.
enum class ChromaFormat { C400, C420, C422, C444 };

ChromaFormat chroma_from_string(const std::string& s);
std::size_t chroma_plane_bytes(ChromaFormat fmt, int width, int height);

// One 8-bit luma frame, row-major. width/height are the coded (padded)
// dimensions; display_width/display_height are the dimensions of the
// original content before edge padding.
struct Frame {
    int width = 0;
    int height = 0;
    int display_width = 0;
    int display_height = 0;
    std::vector<std::uint8_t> samples;

    Frame() = default;
    Frame(int w, int h)
        : width(w), height(h), display_width(w), display_height(h), samples(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t at(int x, int y) const { return samples[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return samples[static_cast<std::size_t>(y) * width + x]; }

    // Clamped access: coordinates outside the frame replicate the border.
    std::uint8_t at_clamped(int x, int y) const;
};

// Tiling of a frame into non-overlapping block_size x block_size blocks,
// origins in raster order.
struct BlockGrid {
    int block_size = 16;
    std::vector<std::pair<int, int>> origins;  // (x, y) of each block's top-left
};

BlockGrid make_grid(int width, int height, int block_size);

// Pads the right/bottom edges by sample replication so that both dimensions
// are multiples of block_size. display_* keep the pre-padding dimensions.
Frame pad_to_block_multiple(const Frame& f, int block_size);

// Crops a frame back to its display dimensions.
Frame crop_to_display(const Frame& f);

// Reads `count` frames of 8-bit planar video. Luma is kept, chroma planes
// (per `chroma`) are skipped. Frames are padded to block_size multiples.
std::vector<Frame> load_raw_video(const std::string& path, int width, int height, int count,
                                  int block_size = 16, ChromaFormat chroma = ChromaFormat::C420);

// Writes luma planes only (4:0:0), cropped to display dimensions.
void write_raw_video(const std::string& path, const std::vector<Frame>& frames);

// 10*log10(255^2 / MSE) over all samples; +infinity when the frames agree.
double psnr(const Frame& a, const Frame& b);

}  // namespace tsvc
