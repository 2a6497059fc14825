#include "semu/model_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "semu/errors.hpp"

namespace semu {

namespace {

void write_double(std::ostream& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", v);
    out << buf;
}

double parse_double(const std::string& tok, const std::string& path) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') {
        throw FormatError(path + ": bad numeric token '" + tok + "'");
    }
    return v;
}

void write_params(std::ostream& out, const std::vector<Parameter>& params) {
    out << "params " << params.size() << "\n";
    for (const auto& p : params) {
        out << "param " << p.name << " " << p.tensor.rows() << " " << p.tensor.cols() << "\n";
        const auto& v = p.tensor.values();
        for (int r = 0; r < p.tensor.rows(); ++r) {
            for (int c = 0; c < p.tensor.cols(); ++c) {
                if (c > 0) out << ' ';
                write_double(out, v[static_cast<size_t>(r) * p.tensor.cols() + c]);
            }
            out << "\n";
        }
    }
}

// Reads "params N" blocks into the existing (already constructed) parameter
// set, matching entries by name and shape.
void read_params(std::istream& in, std::vector<Parameter>& params, const std::string& path) {
    std::string keyword;
    size_t count = 0;
    if (!(in >> keyword >> count) || keyword != "params") {
        throw FormatError(path + ": expected 'params <count>'");
    }
    if (count != params.size()) {
        throw FormatError(path + ": file has " + std::to_string(count) + " parameters, model has " +
                          std::to_string(params.size()));
    }
    for (size_t i = 0; i < count; ++i) {
        std::string name;
        int rows = 0, cols = 0;
        if (!(in >> keyword >> name >> rows >> cols) || keyword != "param") {
            throw FormatError(path + ": expected 'param <name> <rows> <cols>'");
        }
        auto& p = params[i];
        if (name != p.name) {
            throw FormatError(path + ": parameter '" + name + "' does not match expected '" +
                              p.name + "'");
        }
        if (rows != p.tensor.rows() || cols != p.tensor.cols()) {
            throw FormatError(path + ": parameter '" + name + "' has shape (" +
                              std::to_string(rows) + "x" + std::to_string(cols) +
                              "), expected " + p.tensor.shape().str());
        }
        auto& v = p.tensor.values_mut();
        std::string tok;
        for (size_t k = 0; k < v.size(); ++k) {
            if (!(in >> tok)) {
                throw FormatError(path + ": truncated values for parameter '" + name + "'");
            }
            v[k] = parse_double(tok, path);
        }
    }
}

}  // namespace

void save_codec(const SemanticCodec& codec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    const auto& cfg = codec.config();
    out << "semu-codec v1\n";
    out << "input_dim " << cfg.input_dim << "\n";
    out << "hidden";
    for (int hdim : cfg.hidden) out << " " << hdim;
    out << "\n";
    out << "latent_dim " << cfg.latent_dim << "\n";
    out << "beta ";
    write_double(out, cfg.beta);
    out << "\n";
    write_params(out, codec.params());
    out << "end\n";
    if (!out) throw IoError("failed while writing " + path);
}

SemanticCodec load_codec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::string word, version;
    if (!(in >> word >> version) || word != "semu-codec" || version != "v1") {
        throw FormatError(path + ": not a semu-codec v1 file");
    }

    CodecConfig cfg;
    cfg.hidden.clear();
    if (!(in >> word >> cfg.input_dim) || word != "input_dim") {
        throw FormatError(path + ": expected 'input_dim'");
    }
    if (!(in >> word) || word != "hidden") throw FormatError(path + ": expected 'hidden'");
    {
        std::string rest;
        std::getline(in, rest);
        std::istringstream hs(rest);
        int hdim;
        while (hs >> hdim) cfg.hidden.push_back(hdim);
    }
    if (!(in >> word >> cfg.latent_dim) || word != "latent_dim") {
        throw FormatError(path + ": expected 'latent_dim'");
    }
    std::string beta_tok;
    if (!(in >> word >> beta_tok) || word != "beta") throw FormatError(path + ": expected 'beta'");
    cfg.beta = parse_double(beta_tok, path);

    Rng scratch(0);
    SemanticCodec codec = SemanticCodec::make(cfg, scratch);
    auto params = codec.params();
    read_params(in, params, path);

    if (!(in >> word) || word != "end") throw FormatError(path + ": missing trailing 'end'");
    return codec;
}

void save_classifier(const DownstreamClassifier& cls, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "semu-classifier v1\n";
    out << "input_dim " << cls.input_dim() << "\n";
    out << "hidden " << cls.hidden_width() << "\n";
    out << "classes " << cls.classes() << "\n";
    write_params(out, cls.params());
    out << "end\n";
    if (!out) throw IoError("failed while writing " + path);
}

DownstreamClassifier load_classifier(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::string word, version;
    if (!(in >> word >> version) || word != "semu-classifier" || version != "v1") {
        throw FormatError(path + ": not a semu-classifier v1 file");
    }
    int input_dim = 0, hidden = 0, classes = 0;
    if (!(in >> word >> input_dim) || word != "input_dim") {
        throw FormatError(path + ": expected 'input_dim'");
    }
    if (!(in >> word >> hidden) || word != "hidden") {
        throw FormatError(path + ": expected 'hidden'");
    }
    if (!(in >> word >> classes) || word != "classes") {
        throw FormatError(path + ": expected 'classes'");
    }

    Rng scratch(0);
    DownstreamClassifier cls = DownstreamClassifier::make(input_dim, hidden, classes, scratch);
    auto params = cls.params();
    read_params(in, params, path);

    if (!(in >> word) || word != "end") throw FormatError(path + ": missing trailing 'end'");
    return cls;
}

}  // namespace semu
