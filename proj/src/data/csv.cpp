#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "quite/errors.hpp"
#include "quite/imts.hpp"

namespace quite::data {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

[[noreturn]] void malformed(const std::string& source, std::size_t line_no, const std::string& why) {
    throw ValidationError(source + ":" + std::to_string(line_no) + ": " + why);
}

double parse_double(std::string_view field, const std::string& source, std::size_t line_no, const char* what) {
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(v)) {
        malformed(source, line_no, std::string("bad ") + what + " '" + std::string(field) + "'");
    }
    return v;
}

long parse_int(std::string_view field, const std::string& source, std::size_t line_no, const char* what) {
    long v = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size() || v < 0) {
        malformed(source, line_no, std::string("bad ") + what + " '" + std::string(field) + "'");
    }
    return v;
}

struct RawRow {
    std::size_t line;
    std::size_t variable;
    double time;
    double value;
};

}  // namespace

std::size_t ImtsInstance::num_observations() const {
    std::size_t n = 0;
    for (const auto& v : variables) n += v.size();
    return n;
}

std::string format_real(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

void canonicalize(ImtsInstance& instance) {
    for (std::size_t n = 0; n < instance.variables.size(); ++n) {
        auto& obs = instance.variables[n];
        std::stable_sort(obs.begin(), obs.end(),
                         [](const Observation& a, const Observation& b) { return a.time < b.time; });
        for (std::size_t i = 1; i < obs.size(); ++i) {
            if (obs[i].time == obs[i - 1].time) {
                throw ValidationError("instance '" + instance.id + "' variable " + std::to_string(n) +
                                      ": duplicate timestamp " + format_real(obs[i].time));
            }
        }
    }
}

std::vector<ImtsInstance> parse_csv(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    bool has_label = false;

    std::vector<std::string> order;
    std::map<std::string, std::vector<RawRow>> rows;
    std::map<std::string, std::optional<int>> labels;
    std::size_t num_vars = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split_fields(line);
        if (!header_seen) {
            const bool plain = fields.size() == 4;
            const bool labelled = fields.size() == 5 && fields[4] == "label";
            if (!(plain || labelled) || fields[0] != "instance_id" || fields[1] != "variable_id" ||
                fields[2] != "timestamp" || fields[3] != "value") {
                malformed(source, line_no, "expected header instance_id,variable_id,timestamp,value[,label]");
            }
            has_label = labelled;
            header_seen = true;
            continue;
        }
        if (fields.size() != (has_label ? 5u : 4u)) {
            malformed(source, line_no, "expected " + std::to_string(has_label ? 5 : 4) + " fields, got " +
                                           std::to_string(fields.size()));
        }
        if (fields[0].empty()) malformed(source, line_no, "empty instance_id");
        const std::string id(fields[0]);
        const auto var = static_cast<std::size_t>(parse_int(fields[1], source, line_no, "variable_id"));
        const double t = parse_double(fields[2], source, line_no, "timestamp");
        const double x = parse_double(fields[3], source, line_no, "value");
        if (t < 0.0) malformed(source, line_no, "negative timestamp");
        if (!rows.count(id)) order.push_back(id);
        rows[id].push_back({line_no, var, t, x});
        num_vars = std::max(num_vars, var + 1);
        if (has_label) {
            const int y = static_cast<int>(parse_int(fields[4], source, line_no, "label"));
            auto [it, fresh] = labels.try_emplace(id, y);
            if (!fresh && it->second != y) {
                malformed(source, line_no, "inconsistent label for instance '" + id + "'");
            }
        }
    }
    if (!header_seen) malformed(source, line_no, "missing header row");

    std::vector<ImtsInstance> out;
    out.reserve(order.size());
    for (const auto& id : order) {
        ImtsInstance inst;
        inst.id = id;
        inst.variables.resize(num_vars);
        for (const auto& r : rows[id]) inst.variables[r.variable].push_back({r.value, r.time, 1});
        if (has_label) inst.label = labels[id];
        for (std::size_t n = 0; n < num_vars; ++n) {
            auto& obs = inst.variables[n];
            std::stable_sort(obs.begin(), obs.end(),
                             [](const Observation& a, const Observation& b) { return a.time < b.time; });
            for (std::size_t i = 1; i < obs.size(); ++i) {
                if (obs[i].time == obs[i - 1].time) {
                    std::size_t bad_line = 0;
                    for (const auto& r : rows[id]) {
                        if (r.variable == n && r.time == obs[i].time) bad_line = std::max(bad_line, r.line);
                    }
                    malformed(source, bad_line, "duplicate (instance, variable, timestamp) for '" + id + "'");
                }
            }
        }
        out.push_back(std::move(inst));
    }
    return out;
}

std::vector<ImtsInstance> load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path);
}

std::string format_csv(const std::vector<ImtsInstance>& instances, const std::string& comment) {
    const bool has_label =
        std::any_of(instances.begin(), instances.end(), [](const ImtsInstance& i) { return i.label.has_value(); });
    std::string out;
    if (!comment.empty()) out += "# " + comment + "\n";
    out += has_label ? "instance_id,variable_id,timestamp,value,label\n" : "instance_id,variable_id,timestamp,value\n";
    for (const auto& inst : instances) {
        if (has_label && !inst.label) {
            throw ValidationError("instance '" + inst.id + "' has no label while others do");
        }
        for (std::size_t n = 0; n < inst.variables.size(); ++n) {
            for (const auto& o : inst.variables[n]) {
                out += inst.id;
                out += ',';
                out += std::to_string(n);
                out += ',';
                out += format_real(o.time);
                out += ',';
                out += format_real(o.value);
                if (has_label) {
                    out += ',';
                    out += std::to_string(*inst.label);
                }
                out += '\n';
            }
        }
    }
    return out;
}

void save_csv(const std::string& path, const std::vector<ImtsInstance>& instances, const std::string& comment) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << format_csv(instances, comment);
}

}  // namespace quite::data
