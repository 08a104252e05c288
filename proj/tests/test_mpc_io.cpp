#include <gtest/gtest.h>

#include <cmath>

#include "chantwin/channel.hpp"
#include "chantwin/errors.hpp"
#include "chantwin/fixtures.hpp"
#include "chantwin/mpc_io.hpp"
#include "chantwin/profiles.hpp"

using namespace chantwin;

TEST(MpcIo, RoundTripPreservesMetrics) {
    const auto campus = fixtures::campus();
    const auto lib = default_material_library();
    const auto r = simulate_link(campus.scene, Terminal{{0, -20, 10}, {}, 0, {}}, Terminal{{25, 30, 1.5}, {}, 0, {}},
                                 3.5e9, builtin_profile("online").engine, 0.0, lib);
    ASSERT_GT(r.paths.size(), 1u);
    const auto back = parse_mpc_json(mpc_json(r));
    ASSERT_EQ(back.paths.size(), r.paths.size());
    EXPECT_EQ(back.f_hz, r.f_hz);
    for (std::size_t i = 0; i < r.paths.size(); ++i) {
        EXPECT_EQ(back.paths[i].signature(), r.paths[i].signature());
        EXPECT_NEAR(back.paths[i].power_db(), r.paths[i].power_db(), 1e-9);
        EXPECT_NEAR(std::arg(back.paths[i].amplitude * std::conj(r.paths[i].amplitude)), 0.0, 1e-9);
    }
    EXPECT_NEAR(*path_loss(back), *path_loss(r), 1e-9);
    EXPECT_NEAR(rms_delay_spread(back), rms_delay_spread(r), 1e-15);
    EXPECT_NEAR(similarity_index(back, r), 100.0, 1e-9);
    EXPECT_EQ(mpc_json(back), mpc_json(r));
}

TEST(MpcIo, Rejections) {
    EXPECT_THROW(parse_mpc_json("not json"), ParseError);
    EXPECT_THROW(parse_mpc_json(R"({"schema_version": 99, "frequency_hz": 1e9, "mpcs": []})"), ParseError);
    EXPECT_THROW(parse_mpc_json(R"({"schema_version": 1, "mpcs": []})"), ParseError);
    EXPECT_THROW(parse_mpc_json(
                     R"({"schema_version":1,"frequency_hz":1e9,"tx":[0,0,0],"rx":[1,0,0],"time_s":0,)"
                     R"("mpcs":[{"delay_s":1e-8,"power_db":-40,"phase_rad":0,"aod_az_deg":0,"aod_el_deg":0,)"
                     R"("aoa_az_deg":0,"aoa_el_deg":0,"doppler_hz":0,"signature":[["Q",1]]}]})"),
                 ParseError);
    EXPECT_THROW(load_mpc_json("/nonexistent/mpc.json"), ParseError);
}
