#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tsvc/codec.hpp"
#include "tsvc/harness.hpp"

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + path);
}

std::vector<double> parse_values(const std::string& list, const std::string& axis) {
    std::vector<double> values;
    std::size_t start = 0;
    while (start <= list.size()) {
        const std::size_t comma = list.find(',', start);
        const std::string item = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        try {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            values.push_back(v);
        } catch (const std::exception&) {
            throw std::invalid_argument("grid axis '" + axis + "': bad value '" + item + "'");
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return values;
}

// "q1=1,2,4;q2=8;t=0,0.05" — axes left out fall back to the base config.
tsvc::SweepGrid parse_grid(const std::string& text, const tsvc::CodecConfig& base) {
    tsvc::SweepGrid grid{{base.q1}, {base.q2}, {base.t}};
    std::size_t start = 0;
    while (start < text.size()) {
        const std::size_t semi = text.find(';', start);
        const std::string part = text.substr(start, semi == std::string::npos ? std::string::npos : semi - start);
        if (!part.empty()) {
            const std::size_t eq = part.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("grid entry '" + part + "' is not name=values");
            const std::string name = part.substr(0, eq);
            const std::vector<double> values = parse_values(part.substr(eq + 1), name);
            if (name == "q1")
                grid.q1 = values;
            else if (name == "q2")
                grid.q2 = values;
            else if (name == "t")
                grid.t = values;
            else
                throw std::invalid_argument("unknown grid axis '" + name + "'");
        }
        if (semi == std::string::npos) break;
        start = semi + 1;
    }
    return grid;
}

struct InputArgs {
    std::string input;
    int width = 0;
    int height = 0;
    int frames = 0;
    std::string chroma = "420";
};

void add_input_options(CLI::App* cmd, InputArgs& in) {
    cmd->add_option("--input", in.input, "raw 8-bit planar video file")->required();
    cmd->add_option("--width", in.width, "luma width in pixels")->required();
    cmd->add_option("--height", in.height, "luma height in pixels")->required();
    cmd->add_option("--frames", in.frames, "number of frames to read")->required();
    cmd->add_option("--chroma", in.chroma, "chroma layout of the input: 400, 420, 422 or 444")
        ->default_val("420");
}

void add_codec_options(CLI::App* cmd, tsvc::CodecConfig& cfg, int& search_range) {
    cmd->add_option("--block-size", cfg.block_size, "coded block side in pixels")->default_val(16);
    cmd->add_option("--search-range", search_range, "motion candidate reach r; window is [-r, r-1]")
        ->default_val(24);
    cmd->add_option("--t", cfg.t, "early-termination ratio in [0, 1); 0 disables")->default_val(0.05);
    cmd->add_option("--epsilon-factor", cfg.epsilon_factor, "fidelity target factor on q1^2/12")->default_val(1.2);
    cmd->add_option("--max-atoms", cfg.max_atoms, "per-block atom cap; 0 means block dimension")->default_val(0);
    cmd->add_flag("--one-stage", cfg.one_stage, "skip the residual stage on inter blocks");
    cmd->add_option("--threads", cfg.threads, "worker threads; 0 picks hardware concurrency")->default_val(0);
}

void print_frame_stats(const tsvc::EncodeResult& res) {
    std::printf("frame,type,bits,psnr_db\n");
    for (std::size_t i = 0; i < res.frames.size(); ++i) {
        const tsvc::FrameStats& f = res.frames[i];
        std::printf("%zu,%c,%llu,%.4f\n", i, f.intra ? 'I' : 'P',
                    static_cast<unsigned long long>(f.bits), f.psnr_db);
    }
    std::fprintf(stderr, "total: %zu frames, %llu bits (%zu bytes), mean psnr %.2f dB\n", res.frames.size(),
                 static_cast<unsigned long long>(res.total_bits()), res.stream.size(), res.mean_psnr_db());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tsvc: block codec with motion-candidate sparse coding and a residual transform stage"};
    app.require_subcommand(1);

    InputArgs in;
    tsvc::CodecConfig cfg;
    int search_range = 24;
    std::string output;
    std::string grid_text;
    std::string csv_path;
    std::string ref_path, test_path, ref_chroma = "420", test_chroma = "400";
    int decode_threads = 0;

    CLI::App* enc = app.add_subcommand("encode", "encode raw video to a tsvc stream");
    add_input_options(enc, in);
    add_codec_options(enc, cfg, search_range);
    enc->add_option("--q1", cfg.q1, "stage-1 stepsize")->default_val(8.0);
    enc->add_option("--q2", cfg.q2, "stage-2 stepsize")->default_val(8.0);
    enc->add_option("--output", output, "stream file to write")->required();
    enc->callback([&] {
        cfg.range = tsvc::SearchRange{-search_range, search_range - 1};
        const auto frames = tsvc::load_raw_video(in.input, in.width, in.height, in.frames, cfg.block_size,
                                                 tsvc::chroma_from_string(in.chroma));
        const tsvc::EncodeResult res = tsvc::encode_sequence(frames, cfg);
        write_file(output, res.stream);
        print_frame_stats(res);
    });

    CLI::App* dec = app.add_subcommand("decode", "decode a tsvc stream to raw 8-bit luma");
    dec->add_option("--input", in.input, "stream file to read")->required();
    dec->add_option("--output", output, "raw luma file to write")->required();
    dec->add_option("--threads", decode_threads, "worker threads; 0 picks hardware concurrency")->default_val(0);
    dec->callback([&] {
        const tsvc::DecodeResult res = tsvc::decode_sequence(read_file(in.input), decode_threads);
        tsvc::write_raw_video(output, res.frames);
        std::printf("decoded %zu frames, %dx%d luma\n", res.frames.size(),
                    res.frames.empty() ? 0 : res.frames[0].display_width,
                    res.frames.empty() ? 0 : res.frames[0].display_height);
    });

    CLI::App* cmp = app.add_subcommand("psnr", "luma PSNR between two raw videos");
    cmp->add_option("--ref", ref_path, "reference raw video")->required();
    cmp->add_option("--test", test_path, "video under test")->required();
    cmp->add_option("--width", in.width, "luma width in pixels")->required();
    cmp->add_option("--height", in.height, "luma height in pixels")->required();
    cmp->add_option("--frames", in.frames, "number of frames to compare")->required();
    cmp->add_option("--ref-chroma", ref_chroma, "chroma layout of the reference")->default_val("420");
    cmp->add_option("--test-chroma", test_chroma, "chroma layout of the test file")->default_val("400");
    cmp->callback([&] {
        const auto ref = tsvc::load_raw_video(ref_path, in.width, in.height, in.frames, 1,
                                              tsvc::chroma_from_string(ref_chroma));
        const auto test = tsvc::load_raw_video(test_path, in.width, in.height, in.frames, 1,
                                               tsvc::chroma_from_string(test_chroma));
        double sum = 0.0;
        for (int i = 0; i < in.frames; ++i) {
            const double db = tsvc::psnr(ref[static_cast<std::size_t>(i)], test[static_cast<std::size_t>(i)]);
            std::printf("frame %3d  psnr=%.4f dB\n", i, db);
            sum += db;
        }
        std::printf("mean psnr %.4f dB over %d frames\n", sum / in.frames, in.frames);
    });

    CLI::App* sweep = app.add_subcommand("rd-sweep", "rate-distortion sweep over a q1/q2/t grid");
    add_input_options(sweep, in);
    add_codec_options(sweep, cfg, search_range);
    sweep->add_option("--q1", cfg.q1, "stage-1 stepsize when the grid leaves q1 out")->default_val(8.0);
    sweep->add_option("--q2", cfg.q2, "stage-2 stepsize when the grid leaves q2 out")->default_val(8.0);
    sweep->add_option("--grid", grid_text, "axes as q1=...;q2=...;t=... with comma lists");
    sweep->add_option("--csv", csv_path, "write the sweep table here instead of stdout");
    sweep->callback([&] {
        cfg.range = tsvc::SearchRange{-search_range, search_range - 1};
        const auto frames = tsvc::load_raw_video(in.input, in.width, in.height, in.frames, cfg.block_size,
                                                 tsvc::chroma_from_string(in.chroma));
        const tsvc::SweepGrid grid = parse_grid(grid_text, cfg);
        const auto points = tsvc::rd_sweep(frames, cfg, grid, cfg.threads);
        const std::string csv = tsvc::sweep_csv(points);
        if (csv_path.empty()) {
            std::fputs(csv.c_str(), stdout);
        } else {
            write_file(csv_path, std::vector<std::uint8_t>(csv.begin(), csv.end()));
            std::size_t front = 0;
            for (const auto& p : points) front += p.pareto ? 1 : 0;
            std::printf("%zu points, %zu on the pareto front -> %s\n", points.size(), front, csv_path.c_str());
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const tsvc::StreamError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
