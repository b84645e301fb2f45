#include <gtest/gtest.h>

#include "contract.hpp"
#include "kgmark/error.hpp"
#include "kgmark/http_api.hpp"
#include "service_fixtures.hpp"

using namespace kgmark;
using nlohmann::json;

TEST(HttpApi, StatusMapping)
{
    EXPECT_EQ(api::http_status(ErrorCode::validation), 422);
    EXPECT_EQ(api::http_status(ErrorCode::not_found), 404);
    EXPECT_EQ(api::http_status(ErrorCode::conflict), 409);
    EXPECT_EQ(api::http_status(ErrorCode::unauthorized), 401);
    EXPECT_EQ(api::http_status(ErrorCode::unavailable), 503);
}

TEST(HttpApi, RecordedContract)
{
    fixtures::LiveServer server(fixtures::data_file("james_mock.json"));
    ASSERT_GT(server.port, 0);
    auto failures = fixtures::replay_contract(server, fixtures::load_json(fixtures::data_file("api_contract.json")));
    for (const auto& f : failures) ADD_FAILURE() << f;
}

TEST(HttpApi, LoginSetsHttpOnlyCookie)
{
    fixtures::LiveServer server(fixtures::data_file("james_mock.json"));
    auto c = server.client();
    c.Post("/auth/register", R"({"name":"alice","password":"correct horse"})", "application/json");
    auto r = c.Post("/auth/login", R"({"name":"alice","password":"correct horse"})", "application/json");
    ASSERT_TRUE(r);
    auto cookie = r->get_header_value("Set-Cookie");
    EXPECT_EQ(cookie.rfind("kgmark_session=", 0), 0u);
    EXPECT_NE(cookie.find("HttpOnly"), std::string::npos);
}

TEST(HttpApi, GenerationOutageIs503AndDocumentUntouched)
{
    fixtures::LiveServer server(fixtures::data_file("james_mock.json"));
    auto c = server.client();
    c.Post("/auth/register", R"({"name":"alice","password":"correct horse"})", "application/json");
    auto login = c.Post("/auth/login", R"({"name":"alice","password":"correct horse"})", "application/json");
    httplib::Headers auth{{"Authorization", "Bearer " + json::parse(login->body)["token"].get<std::string>()}};
    auto w = fixtures::ner_wizard({"James worked for Google in Tokyo, the capital of Japan."});
    auto created = c.Post("/projects", auth, w.dump(), "application/json");
    auto pid = json::parse(created->body)["project"]["id"].get<std::string>();
    c.Post("/texts/" + pid + ".t1/markups", auth, R"({"label":"PER","start":0,"end":0})", "application/json");
    auto before = c.Get("/texts/" + pid + ".t1", auth)->body;

    server.gen->set_unavailable(true);
    auto r = c.Post("/texts/" + pid + ".t1/autolabel", auth, "{}", "application/json");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 503);
    EXPECT_EQ(json::parse(r->body)["error"]["code"], "unavailable");
    EXPECT_EQ(c.Get("/texts/" + pid + ".t1", auth)->body, before);

    server.gen->set_unavailable(false);
    EXPECT_EQ(c.Post("/texts/" + pid + ".t1/autolabel", auth, "{}", "application/json")->status, 200);
}
