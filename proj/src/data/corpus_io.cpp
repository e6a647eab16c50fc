// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <sstream>

#include "epcforge/data/corpus.hpp"
#include "json.hpp"

namespace epcforge::data {

using nlohmann::json;

namespace {

json to_json(const EpcSample& s) {
    json io = json::array();
    for (const IoExample& e : s.io_examples) io.push_back({{"input", e.input}, {"output", e.output}});
    return json{{"tags", s.tags},
                {"description", s.description},
                {"input_format", s.input_format},
                {"output_format", s.output_format},
                {"io_examples", std::move(io)},
                {"inefficient_code", s.inefficient_code},
                {"efficient_codes", s.efficient_codes},
                {"difficulty", to_string(s.difficulty)},
                {"split", to_string(s.split)},
                {"submission_index", s.submission_index}};
}

const json& field(const json& obj, const char* name, std::size_t line) {
    auto it = obj.find(name);
    if (it == obj.end()) throw CorpusError(line, std::string("missing field '") + name + "'");
    return *it;
}

std::string text_field(const json& obj, const char* name, std::size_t line) {
    const json& v = field(obj, name, line);
    if (!v.is_string()) throw CorpusError(line, std::string("field '") + name + "' must be a string");
    return v.get<std::string>();
}

EpcSample from_json(const json& obj, std::size_t line) {
    if (!obj.is_object()) throw CorpusError(line, "record is not an object");
    EpcSample s;
    s.tags = text_field(obj, "tags", line);
    s.description = text_field(obj, "description", line);
    s.input_format = text_field(obj, "input_format", line);
    s.output_format = text_field(obj, "output_format", line);

    const json& io = field(obj, "io_examples", line);
    if (!io.is_array() || io.empty()) throw CorpusError(line, "field 'io_examples' must be a nonempty list");
    for (const json& e : io) {
        if (!e.is_object()) throw CorpusError(line, "field 'io_examples' holds a non-object entry");
        s.io_examples.push_back({text_field(e, "input", line), text_field(e, "output", line)});
    }
    s.inefficient_code = text_field(obj, "inefficient_code", line);

    const json& codes = field(obj, "efficient_codes", line);
    if (!codes.is_array() || codes.empty()) {
        throw CorpusError(line, "field 'efficient_codes' must be a nonempty list");
    }
    for (const json& c : codes) {
        if (!c.is_string()) throw CorpusError(line, "field 'efficient_codes' holds a non-string entry");
        s.efficient_codes.push_back(c.get<std::string>());
    }
    try {
        s.difficulty = parse_difficulty(text_field(obj, "difficulty", line));
        s.split = parse_split(text_field(obj, "split", line));
    } catch (const std::invalid_argument& err) {
        throw CorpusError(line, err.what());
    }
    const json& index = field(obj, "submission_index", line);
    if (!index.is_number_integer()) throw CorpusError(line, "field 'submission_index' must be an integer");
    s.submission_index = index.get<std::int64_t>();
    return s;
}

}  // namespace

CorpusError::CorpusError(std::size_t line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

void save_corpus(const std::filesystem::path& path, const std::vector<EpcSample>& corpus) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write corpus to " + path.string());
        out << kCorpusHeader << '\n';
        for (const EpcSample& s : corpus) out << to_json(s).dump() << '\n';
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw std::runtime_error("failed while writing " + path.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

std::vector<EpcSample> load_corpus(const std::filesystem::path& path, bool check_programs) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open corpus " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kCorpusHeader) {
        throw CorpusError(1, "expected header '" + std::string(kCorpusHeader) + "'");
    }
    std::vector<EpcSample> corpus;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& err) {
            throw CorpusError(line_no, std::string("malformed record: ") + err.what());
        }
        EpcSample s = from_json(obj, line_no);
        if (check_programs) {
            if (const std::string why = validate_sample(s); !why.empty()) throw CorpusError(line_no, why);
        }
        corpus.push_back(std::move(s));
    }
    return corpus;
}

}  // namespace epcforge::data
