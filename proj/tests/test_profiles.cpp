#include <gtest/gtest.h>

#include "chantwin/errors.hpp"
#include "chantwin/profiles.hpp"

using namespace chantwin;

TEST(Profiles, OfflinePreset) {
    const auto p = builtin_profile("offline");
    EXPECT_EQ(p.engine.max_order, 4);
    EXPECT_EQ(p.engine.n_rays, std::size_t{1} << 20);
    EXPECT_EQ(p.engine.max_reflections, 4);
    EXPECT_EQ(p.engine.max_transmissions, 2);
    EXPECT_EQ(p.engine.max_diffractions, 1);
    EXPECT_EQ(p.engine.max_scatterings, 1);
    EXPECT_DOUBLE_EQ(p.engine.rel_power_floor_db, -40.0);
    EXPECT_TRUE(p.engine.image_method);
    EXPECT_GT(p.latency_budget_s, 0.0);
    EXPECT_GT(p.grid_step_default, 0.0);
}

TEST(Profiles, OnlinePreset) {
    const auto p = builtin_profile("online");
    EXPECT_EQ(p.engine.max_order, 3);
    EXPECT_EQ(p.engine.n_rays, std::size_t{1} << 14);
    EXPECT_EQ(p.engine.max_reflections, 3);
    EXPECT_EQ(p.engine.max_transmissions, 1);
    EXPECT_EQ(p.engine.max_diffractions, 1);
    EXPECT_EQ(p.engine.max_scatterings, 0);
    EXPECT_DOUBLE_EQ(p.engine.rel_power_floor_db, -25.0);
    EXPECT_EQ(p.mechanisms, (std::vector<std::string>{"reflection", "transmission", "diffraction"}));
}

TEST(Profiles, PresetsAreConstants) {
    for (const auto& n : builtin_profile_names()) EXPECT_EQ(builtin_profile(n), builtin_profile(n));
}

TEST(Profiles, UnknownNameListsValidNames) {
    try {
        builtin_profile("realtime");
        FAIL();
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("offline"), std::string::npos);
        EXPECT_NE(msg.find("online"), std::string::npos);
    }
}

TEST(Profiles, ResolveWithoutOverridesIsIdentity) {
    for (const auto& n : builtin_profile_names()) {
        const auto p = builtin_profile(n);
        EXPECT_EQ(resolve_profile(p, {}), p.engine);
    }
}

TEST(Profiles, OverrideChangesOnlyThatField) {
    const auto p = builtin_profile("online");
    ProfileOverrides o;
    o.n_rays = 4096;
    auto c = resolve_profile(p, o);
    EXPECT_EQ(c.n_rays, 4096u);
    c.n_rays = p.engine.n_rays;
    EXPECT_EQ(c, p.engine);
}

TEST(Profiles, BoundsOnNamedPresets) {
    ProfileOverrides o;
    o.max_order = 6;
    o.max_reflections = 6;
    EXPECT_THROW(resolve_profile(builtin_profile("online"), o), ValidationError);
    EXPECT_NO_THROW(resolve_profile(builtin_profile("custom"), o));
    ProfileOverrides lower;
    lower.max_order = 2;
    lower.max_reflections = 2;
    EXPECT_EQ(resolve_profile(builtin_profile("offline"), lower).max_order, 2);
    ProfileOverrides bad;
    bad.n_rays = 0;
    EXPECT_THROW(resolve_profile(builtin_profile("custom"), bad), ValidationError);
}

TEST(Profiles, OverrideFile) {
    const auto o = parse_profile_overrides(R"({"n_rays": 1024, "image_method": false, "rel_power_floor_db": -30})");
    EXPECT_EQ(*o.n_rays, 1024u);
    EXPECT_FALSE(*o.image_method);
    EXPECT_DOUBLE_EQ(*o.rel_power_floor_db, -30.0);
    EXPECT_FALSE(o.max_order);
    EXPECT_THROW(parse_profile_overrides(R"({"rays": 1})"), ParseError);
    EXPECT_THROW(parse_profile_overrides("[1]"), ParseError);
    EXPECT_THROW(parse_profile_overrides(R"({"n_rays": "many"})"), ParseError);
    EXPECT_THROW(load_profile_overrides("/nonexistent/profile.json"), ParseError);
}
