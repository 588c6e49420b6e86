// Generates the weight files shipped in data/: the structured sampler weights
// and the default-initialized JSCC weights.
#include <cstdio>
#include <filesystem>
#include <string>

#include "hvc/codec.hpp"
#include "hvc/sampling.hpp"

int main(int argc, char** argv) {
    const std::string out_dir = argc > 1 ? argv[1] : "data";
    if (out_dir.rfind("-", 0) == 0) {
        std::printf("usage: make_weights [output_dir]   (default: data)\n");
        return out_dir == "-h" || out_dir == "--help" ? 0 : 2;
    }
    std::filesystem::create_directories(out_dir);

    const hvc::SamplerWeights sw = hvc::make_structured_weights();
    const std::string sampler_path = out_dir + "/sampler_weights.bin";
    hvc::save_sampler_weights(sampler_path, sw);
    std::printf("wrote %s (d=%zu, %zu MLP layers)\n", sampler_path.c_str(), sw.dim(),
                sw.mlp.size());

    const hvc::JsccWeights jw = hvc::make_default_jscc_weights();
    const std::string jscc_path = out_dir + "/jscc_weights.bin";
    hvc::save_jscc_weights(jscc_path, jw);
    std::printf("wrote %s (d_fine=%zu, d_coarse=%zu, r_max=%zu)\n", jscc_path.c_str(),
                jw.d_fine(), jw.d_coarse(), jw.r_max());
    return 0;
}
