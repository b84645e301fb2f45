// kgmark command line: `serve` runs the annotation service, `eval` scores exports.
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "kgmark/error.hpp"
#include "kgmark/eval.hpp"
#include "kgmark/http_api.hpp"
#include "kgmark/serialization.hpp"
#include "kgmark/service.hpp"

using namespace kgmark;
using nlohmann::json;

namespace {

api::HttpApi* running = nullptr;

void on_signal(int)
{
    if (running) running->stop();
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::not_found, "cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json score_json(const eval::Score& s)
{
    return json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
                {"tp", s.tp},               {"n_pred", s.n_pred}, {"n_gold", s.n_gold}};
}

struct ServeArgs {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string data_dir = "kgmark-data";
    std::string gen_endpoint;
    std::string gen_key_env = "KGMARK_GEN_TOKEN";
    int gen_timeout = 30;
    int gen_retries = 2;
    std::string mock_gen;
    std::string templates = KGMARK_TEMPLATE_DIR;
    std::string embed_endpoint;
    std::size_t max_autolabel = 4;
};

int serve(const ServeArgs& a)
{
    std::shared_ptr<autolabel::GenerationClient> gen;
    if (!a.mock_gen.empty())
        gen = std::make_shared<autolabel::MockGenerationClient>(autolabel::MockGenerationClient::from_file(a.mock_gen));
    else if (!a.gen_endpoint.empty())
        gen = std::make_shared<autolabel::HttpGenerationClient>(autolabel::HttpClientConfig{
            a.gen_endpoint, a.gen_key_env, std::chrono::seconds(a.gen_timeout), a.gen_retries});
    else
        std::cerr << "warning: no --gen-endpoint or --mock-gen; auto-label answers 503\n";

    api::ServiceOptions opts;
    opts.template_dir = a.templates;
    opts.max_concurrent_autolabel = a.max_autolabel;
    if (!a.embed_endpoint.empty()) opts.embeddings = std::make_shared<pipeline::HttpEmbeddingProvider>(a.embed_endpoint);

    api::Service service(std::make_shared<api::FileStore>(a.data_dir), gen, opts);
    api::HttpApi http(service);
    int port = http.bind(a.host, a.port);
    if (port < 0) {
        std::cerr << "cannot bind " << a.host << ":" << a.port << "\n";
        return 1;
    }
    running = &http;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "listening on http://" << a.host << ":" << port << " (data in " << a.data_dir << ")\n";
    http.serve();
    running = nullptr;
    return 0;
}

struct EvalArgs {
    std::string task;
    std::string gold;
    std::string pred;
    std::vector<std::string> group;
};

int evaluate(const EvalArgs& a)
{
    auto task = parse_task(a.task);
    auto gold = eval::records_from_export(task, slurp(a.gold));
    json out{{"task", a.task}};
    if (!a.pred.empty()) {
        auto pred = eval::records_from_export(task, slurp(a.pred));
        auto r = eval::micro_f1(task, gold, pred);
        out["micro"] = score_json(r.main);
        if (r.arg_c) out["arg_c"] = score_json(*r.arg_c);
        if (r.trig_c) out["trig_c"] = score_json(*r.trig_c);
    }
    if (!a.group.empty()) {
        std::vector<eval::RecordSet> members;
        for (const auto& f : a.group) members.push_back(eval::records_from_export(task, slurp(f)));
        std::vector<std::string> dataset;
        for (const auto& [id, _] : gold) dataset.push_back(id);
        out["variance"] = eval::intra_group_variance(task, members, dataset);
        out["group_size"] = members.size();
        out["documents"] = dataset.size();
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"kgmark: collaborative knowledge-graph annotation service"};
    app.require_subcommand(1);

    ServeArgs sa;
    auto* s = app.add_subcommand("serve", "run the HTTP annotation service");
    s->add_option("--host", sa.host, "interface to bind");
    s->add_option("--port", sa.port, "port (0 picks a free one)");
    s->add_option("--data-dir", sa.data_dir, "directory of the embedded record store");
    s->add_option("--gen-endpoint", sa.gen_endpoint, "URL of the text-generation endpoint");
    s->add_option("--gen-key-env", sa.gen_key_env, "environment variable holding the endpoint token");
    s->add_option("--gen-timeout", sa.gen_timeout, "per-request timeout in seconds");
    s->add_option("--gen-retries", sa.gen_retries, "retries after a failed request");
    s->add_option("--mock-gen", sa.mock_gen, "canned-reply fixture file (replaces the endpoint)")->check(CLI::ExistingFile);
    s->add_option("--templates", sa.templates, "prompt template directory")->check(CLI::ExistingDirectory);
    s->add_option("--embed-endpoint", sa.embed_endpoint, "URL of an embedding service for clustering");
    s->add_option("--max-autolabel", sa.max_autolabel, "concurrent auto-label requests");

    EvalArgs ea;
    auto* e = app.add_subcommand("eval", "score exports: micro-F1 and intra-group variance");
    e->add_option("--task", ea.task, "ner, re or ee")->required()->check(CLI::IsMember({"ner", "re", "ee"}));
    e->add_option("--gold", ea.gold, "gold export JSON")->required()->check(CLI::ExistingFile);
    e->add_option("--pred", ea.pred, "predicted export JSON")->check(CLI::ExistingFile);
    e->add_option("--group", ea.group, "annotator exports for the variance (two or more)")->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);
    try {
        if (s->parsed()) return serve(sa);
        if (ea.pred.empty() && ea.group.empty()) {
            std::cerr << "eval needs --pred and/or --group\n";
            return 2;
        }
        return evaluate(ea);
    } catch (const Error& err) {
        std::cerr << "error (" << to_string(err.code()) << "): " << err.what() << "\n";
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
}
