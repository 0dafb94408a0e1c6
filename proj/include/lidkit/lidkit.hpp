#pragma once

#include <lidkit/datamodel.hpp>
#include <lidkit/error.hpp>
#include <lidkit/estimators.hpp>
#include <lidkit/neighbors.hpp>
#include <lidkit/parallel.hpp>
#include <lidkit/synthetic.hpp>
#include <lidkit/truthful.hpp>
#include <lidkit/sanity.hpp>
