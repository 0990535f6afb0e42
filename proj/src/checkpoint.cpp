#include "kgeir/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "kgeir/csv.hpp"
#include "kgeir/error.hpp"
#include "kgeir/nacd.hpp"

namespace kgeir {

namespace {

void write_params_csv(const std::string& path,
                      const std::vector<std::pair<std::string, const Matrix*>>& entries) {
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    out << "name,row,col,value\n";
    for (const auto& [name, m] : entries)
        for (int i = 0; i < m->rows; ++i)
            for (int j = 0; j < m->cols; ++j)
                out << name << ',' << i << ',' << j << ',' << format_double((*m)(i, j)) << '\n';
    require(out.good(), "write failed: " + path);
}

void read_params_csv(const std::string& path, std::vector<std::pair<std::string, Matrix*>> targets) {
    CsvReader reader(path);
    const int c_name = reader.column("name");
    const int c_row = reader.column("row");
    const int c_col = reader.column("col");
    const int c_value = reader.column("value");
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        Matrix* m = nullptr;
        for (auto& [name, target] : targets)
            if (name == fields[c_name]) m = target;
        if (!m) reader.fail_at("unknown parameter: " + fields[c_name]);
        std::int64_t i = 0, j = 0;
        if (!parse_int64(fields[c_row], i) || !parse_int64(fields[c_col], j))
            reader.fail_at("bad index");
        if (i < 0 || i >= m->rows || j < 0 || j >= m->cols)
            reader.fail_at("index out of range for " + fields[c_name]);
        (*m)(static_cast<int>(i), static_cast<int>(j)) = std::strtod(fields[c_value].c_str(), nullptr);
    }
}

}  // namespace

void save_checkpoint(const Cdm& model, const std::string& dir, std::uint64_t seed,
                     std::uint64_t config_hash) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["kind"] = to_string(model.kind());
    manifest["n_students"] = model.n_students();
    manifest["n_exercises"] = model.n_exercises();
    manifest["seed"] = seed;
    manifest["config_hash"] = config_hash;
    nlohmann::json shapes = nlohmann::json::object();
    std::vector<std::pair<std::string, const Matrix*>> entries;
    for (const auto& [name, m] : model.params().params) {
        shapes[name] = {m.rows, m.cols};
        entries.emplace_back(name, &m);
    }
    if (model.kind() == CdmKind::Nacd) {
        const NacdModel& nacd = as_nacd(model);
        const NacdOptions& o = nacd.options();
        manifest["nacd"] = {{"attention_dim", o.attention_dim},
                            {"hidden_dim", o.hidden_dim},
                            {"student_out_dim", o.student_out_dim},
                            {"clip_k", o.clip_k},
                            {"history_window", o.history_window},
                            {"literal_fe", o.literal_fe},
                            {"disable_exercise_factor", o.disable_exercise_factor},
                            {"disable_student_factor", o.disable_student_factor},
                            {"n_skills", nacd.weighted_q().cols}};
        entries.emplace_back("weighted_q", &nacd.weighted_q());
        shapes["weighted_q"] = {nacd.weighted_q().rows, nacd.weighted_q().cols};
    }
    manifest["shapes"] = shapes;
    std::ofstream mf(dir + "/manifest.json");
    require(mf.good(), "cannot write checkpoint manifest in " + dir);
    mf << manifest.dump(2) << '\n';
    write_params_csv(dir + "/params.csv", entries);
}

std::unique_ptr<Cdm> load_checkpoint(const std::string& dir) {
    std::ifstream mf(dir + "/manifest.json");
    require(mf.good(), "cannot open checkpoint manifest in " + dir);
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        fail(dir + "/manifest.json: invalid JSON: " + std::string(e.what()));
    }
    const std::string kind_str = manifest.at("kind").get<std::string>();
    CdmKind kind;
    require(cdm_kind_from_string(kind_str, kind), dir + ": unknown model kind " + kind_str);
    const int n_students = manifest.at("n_students").get<int>();
    const int n_exercises = manifest.at("n_exercises").get<int>();

    std::unique_ptr<Cdm> model;
    if (kind == CdmKind::Irt) {
        model = make_irt(n_students, n_exercises, 0);
    } else if (kind == CdmKind::Mirt) {
        const auto shape = manifest.at("shapes").at("theta");
        model = make_mirt(n_students, n_exercises, shape[1].get<int>(), 0);
    } else {
        const auto& nj = manifest.at("nacd");
        NacdOptions opts;
        opts.attention_dim = nj.at("attention_dim").get<int>();
        opts.hidden_dim = nj.at("hidden_dim").get<int>();
        opts.student_out_dim = nj.at("student_out_dim").get<int>();
        opts.clip_k = nj.at("clip_k").get<int>();
        opts.history_window = nj.at("history_window").get<int>();
        opts.literal_fe = nj.at("literal_fe").get<bool>();
        opts.disable_exercise_factor = nj.at("disable_exercise_factor").get<bool>();
        opts.disable_student_factor = nj.at("disable_student_factor").get<bool>();
        Matrix qw(n_exercises, nj.at("n_skills").get<int>());
        model = make_nacd(std::move(qw), n_students, opts, 0);
    }

    std::vector<std::pair<std::string, Matrix*>> targets;
    for (auto& [name, m] : model->params().params) targets.emplace_back(name, &m);
    if (kind == CdmKind::Nacd)
        targets.emplace_back("weighted_q", const_cast<Matrix*>(&as_nacd(*model).weighted_q()));
    read_params_csv(dir + "/params.csv", targets);
    return model;
}

}  // namespace kgeir
