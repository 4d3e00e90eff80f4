#include "ecgicd/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "ecgicd/csv.hpp"
#include "ecgicd/timeparse.hpp"

namespace ecgicd::signal {

void Ecg::validate() const {
    if (fs <= 0.0) throw SignalIoError("sampling rate must be positive");
    if (samples.empty()) throw EmptySignal();
    const std::size_t len = samples[0].size();
    for (const auto& lead : samples)
        if (lead.size() != len) throw SignalIoError("leads have unequal lengths");
    if (!leads.empty() && leads.size() != samples.size())
        throw SignalIoError("lead name count does not match lead count");
}

const std::vector<std::string>& standard_leads() {
    static const std::vector<std::string> kLeads = {
        "I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6",
    };
    return kLeads;
}

Ecg fill_missing(const Ecg& sig, PreprocessStats* stats) {
    sig.validate();
    Ecg out = sig;
    for (auto& lead : out.samples) {
        const std::size_t n = lead.size();
        std::size_t first_finite = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (std::isfinite(lead[i])) {
                first_finite = i;
                break;
            }
        }
        if (first_finite == n) {
            std::fill(lead.begin(), lead.end(), 0.0f);
            if (stats != nullptr) {
                ++stats->all_missing_leads;
                stats->boundary_zero_fills += n;
            }
            continue;
        }
        std::size_t last_finite = first_finite;
        for (std::size_t i = n; i-- > 0;) {
            if (std::isfinite(lead[i])) {
                last_finite = i;
                break;
            }
        }
        for (std::size_t i = 0; i < first_finite; ++i) lead[i] = 0.0f;
        for (std::size_t i = last_finite + 1; i < n; ++i) lead[i] = 0.0f;
        if (stats != nullptr)
            stats->boundary_zero_fills += first_finite + (n - 1 - last_finite);

        std::size_t i = first_finite;
        while (i < last_finite) {
            if (std::isfinite(lead[i + 1])) {
                ++i;
                continue;
            }
            std::size_t j = i + 1;
            while (!std::isfinite(lead[j])) ++j;  // j <= last_finite
            const double left = lead[i];
            const double right = lead[j];
            const double span = static_cast<double>(j - i);
            for (std::size_t k = i + 1; k < j; ++k) {
                const double t = static_cast<double>(k - i) / span;
                lead[k] = static_cast<float>(left + (right - left) * t);
            }
            if (stats != nullptr) stats->interpolated_values += j - i - 1;
            i = j;
        }
    }
    return out;
}

Ecg resample(const Ecg& sig, double fs_out) {
    sig.validate();
    if (fs_out <= 0.0) throw SignalIoError("output rate must be positive");
    if (sig.n_samples() == 0) throw EmptySignal();
    if (sig.fs == fs_out) return sig;  // bitwise pass-through

    const std::size_t n_in = sig.n_samples();
    const auto n_out = static_cast<std::size_t>(
        std::llround(static_cast<double>(n_in) * fs_out / sig.fs));
    Ecg out;
    out.leads = sig.leads;
    out.fs = fs_out;
    out.samples.resize(sig.n_leads());
    const double step = sig.fs / fs_out;  // input samples per output sample
    for (std::size_t l = 0; l < sig.n_leads(); ++l) {
        const auto& in = sig.samples[l];
        auto& dst = out.samples[l];
        dst.resize(n_out);
        for (std::size_t j = 0; j < n_out; ++j) {
            const double pos = static_cast<double>(j) * step;
            const auto i0 = static_cast<std::size_t>(pos);
            if (i0 >= n_in - 1) {
                dst[j] = in[n_in - 1];  // clamp past the last input sample
                continue;
            }
            const double frac = pos - static_cast<double>(i0);
            if (frac == 0.0) {
                dst[j] = in[i0];
            } else {
                dst[j] = static_cast<float>(in[i0] + (in[i0 + 1] - in[i0]) * frac);
            }
        }
    }
    return out;
}

Ecg clip(const Ecg& sig, float limit, PreprocessStats* stats) {
    sig.validate();
    Ecg out = sig;
    for (auto& lead : out.samples) {
        for (auto& v : lead) {
            if (v > limit) {
                v = limit;
                if (stats != nullptr) ++stats->clipped_values;
            } else if (v < -limit) {
                v = -limit;
                if (stats != nullptr) ++stats->clipped_values;
            }
        }
    }
    return out;
}

Ecg preprocess(const Ecg& sig, double fs_out, float limit, PreprocessStats* stats) {
    return clip(resample(fill_missing(sig, stats), fs_out), limit, stats);
}

namespace {

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_raw(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void write_ecg1(const std::string& path, const Ecg& sig) {
    sig.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SignalIoError("cannot write " + path);
    out.write("ECG1", 4);
    write_raw(out, static_cast<std::uint32_t>(sig.n_leads()));
    write_raw(out, static_cast<std::uint32_t>(sig.n_samples()));
    write_raw(out, static_cast<float>(sig.fs));
    for (const auto& lead : sig.samples)
        out.write(reinterpret_cast<const char*>(lead.data()),
                  static_cast<std::streamsize>(lead.size() * sizeof(float)));
    if (!out) throw SignalIoError("short write to " + path);
}

Ecg read_ecg1(const std::string& path, const std::vector<std::string>* leads) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SignalIoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "ECG1", 4) != 0)
        throw SignalIoError(path + ": not an ECG1 payload");
    const auto n_leads = read_raw<std::uint32_t>(in);
    const auto n_samples = read_raw<std::uint32_t>(in);
    const auto fs = read_raw<float>(in);
    if (!in || n_leads == 0 || n_leads > 64)
        throw SignalIoError(path + ": corrupt ECG1 header");
    Ecg sig;
    sig.fs = fs;
    if (leads != nullptr) {
        sig.leads = *leads;
    } else if (n_leads == standard_leads().size()) {
        sig.leads = standard_leads();
    }
    sig.samples.assign(n_leads, std::vector<float>(n_samples));
    for (auto& lead : sig.samples) {
        in.read(reinterpret_cast<char*>(lead.data()),
                static_cast<std::streamsize>(lead.size() * sizeof(float)));
    }
    if (!in) throw SignalIoError(path + ": truncated ECG1 payload");
    return sig;
}

void write_ecg_csv(const std::string& path, const Ecg& sig) {
    sig.validate();
    std::ofstream out(path);
    if (!out) throw SignalIoError("cannot write " + path);
    for (std::size_t l = 0; l < sig.n_leads(); ++l) {
        if (l) out << ',';
        out << (l < sig.leads.size() ? sig.leads[l] : "lead" + std::to_string(l));
    }
    out << '\n';
    for (std::size_t i = 0; i < sig.n_samples(); ++i) {
        for (std::size_t l = 0; l < sig.n_leads(); ++l) {
            if (l) out << ',';
            const float v = sig.samples[l][i];
            if (std::isfinite(v)) out << v;
        }
        out << '\n';
    }
}

Ecg read_ecg_csv(const std::string& path, double fs) {
    const CsvTable t = read_csv(path);
    Ecg sig;
    sig.fs = fs;
    sig.leads = t.header;
    sig.samples.assign(t.header.size(), {});
    for (auto& lead : sig.samples) lead.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        for (std::size_t l = 0; l < row.size(); ++l) {
            sig.samples[l].push_back(
                row[l].empty() ? std::numeric_limits<float>::quiet_NaN() : std::stof(row[l]));
        }
    }
    return sig;
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
    const CsvTable t = read_csv(path);
    const std::size_t c_rec = t.column("record_id");
    const std::size_t c_sub = t.column("subject_id");
    const std::size_t c_time = t.column("ecg_time");
    const std::size_t c_fs = t.column("fs");
    const std::size_t c_n = t.column("n_samples");
    const std::size_t c_path = t.column("path");
    std::vector<ManifestRow> rows;
    rows.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        ManifestRow row;
        row.record_id = r[c_rec];
        row.subject_id = r[c_sub];
        row.ecg_time = parse_timestamp(r[c_time]);
        row.fs = std::stod(r[c_fs]);
        row.n_samples = static_cast<std::uint32_t>(std::stoul(r[c_n]));
        row.path = r[c_path];
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
    std::ofstream out(path);
    if (!out) throw SignalIoError("cannot write " + path);
    out << "record_id,subject_id,ecg_time,fs,n_samples,path\n";
    for (const auto& r : rows) {
        out << r.record_id << ',' << r.subject_id << ',' << format_timestamp(r.ecg_time) << ','
            << r.fs << ',' << r.n_samples << ',' << r.path << '\n';
    }
}

Ecg load_record(const ManifestRow& row, const std::string& base_dir) {
    namespace fs = std::filesystem;
    fs::path p(row.path);
    if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
    if (p.extension() == ".csv") return read_ecg_csv(p.string(), row.fs);
    return read_ecg1(p.string());
}

}  // namespace ecgicd::signal
