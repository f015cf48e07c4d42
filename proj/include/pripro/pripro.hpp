#pragma once

#include "pripro/attendance.hpp"
#include "pripro/catalog.hpp"
#include "pripro/errors.hpp"
#include "pripro/event_log.hpp"
#include "pripro/evolution.hpp"
#include "pripro/http.hpp"
#include "pripro/ids.hpp"
#include "pripro/period.hpp"
#include "pripro/profile_level.hpp"
#include "pripro/rational.hpp"
#include "pripro/replay.hpp"
#include "pripro/rules.hpp"
#include "pripro/service.hpp"
#include "pripro/service_config.hpp"
#include "pripro/simulator.hpp"
#include "pripro/snapshot.hpp"
#include "pripro/store.hpp"
#include "pripro/time.hpp"
#include "pripro/wire.hpp"
