import dataclasses

import numpy as np
import pytest

from photonic_pim.compute import check_interference_safety
from photonic_pim.config import load_config
from photonic_pim.errors import ConfigError, MappingError
from photonic_pim.executor import execute_network, synthesize_weights
from photonic_pim.mapper import (
    LayerSpec,
    NetworkSpec,
    build_network_plans,
    map_conv_layer,
    map_fc_layer,
    ofm_dims,
    param_count,
    plan_tdm,
    resolve_network,
    simulate_network,
)

from oracle import network_oracle


def conv(name, c, k, s=1, p=0, groups=1, bias=True, from_=None):
    return LayerSpec(
        name=name, kind="conv", out_channels=c, kernel=(k, k), stride=s,
        padding=p, groups=groups, bias=bias,
        from_layers=(from_,) if from_ else (),
    )


class TestOfmDims:
    def test_textbook_case(self):
        layer = conv("c", 1, 2)
        assert ofm_dims((4, 4, 1), layer)[:2] == (3, 3)

    def test_same_padding(self):
        layer = conv("c", 8, 3, s=1, p=1)
        assert ofm_dims((32, 32, 3), layer) == (32, 32, 8)

    def test_strided(self):
        layer = conv("c", 8, 3, s=2, p=0)
        assert ofm_dims((7, 7, 3), layer)[:2] == (3, 3)

    def test_nonpositive_output_rejected(self):
        layer = conv("c", 8, 9)
        with pytest.raises(MappingError):
            ofm_dims((4, 4, 3), layer)


class TestTdmPlanning:
    def test_native_width_single_pass(self):
        assert plan_tdm(4, 4) == [(0, 0, 0)]

    def test_eight_bit_four_passes(self):
        passes = plan_tdm(8, 4)
        assert len(passes) == 4
        assert sorted(s for s, _, _ in passes) == [0, 4, 4, 8]
        assert passes[0][0] == 0  # low nibbles first

    def test_sixteen_bit_sixteen_passes(self):
        assert len(plan_tdm(16, 4)) == 16

    def test_indivisible_width_rejected(self):
        with pytest.raises(MappingError):
            plan_tdm(6, 4)


class TestParamCount:
    def test_hand_counted_conv_with_bias(self):
        net = NetworkSpec(
            name="t", input_shape=(8, 8, 2),
            layers=(conv("c", 4, 3, p=1),),
        )
        assert param_count(net) == 3 * 3 * 2 * 4 + 4

    def test_depthwise_groups(self):
        net = NetworkSpec(
            name="t", input_shape=(8, 8, 6),
            layers=(conv("dw", 6, 3, p=1, groups=6, bias=False),),
        )
        assert param_count(net) == 9 * 6

    def test_fc_and_bias_flags(self):
        net = NetworkSpec(
            name="t", input_shape=(2, 2, 3),
            layers=(LayerSpec(name="f", kind="fc", out_features=5, bias=False),),
        )
        assert param_count(net) == 12 * 5


class TestConvPlans:
    def test_paired_row_instance_stats(self, geometry):
        layer = conv("c", 1, 2, bias=False)
        plan = map_conv_layer(layer, (2, 4, 1), geometry, operand_bits=4)
        # one output row, three windows, stride-1 2-wide kernel -> 2 phases
        assert plan.kind == "conv"
        assert plan.mac_count == 1 * 3 * 1 * (2 * 2 * 1)
        assert plan.slot_count == 2  # ceil(3 elements / 2 windows per slot)
        assert plan.tdm_passes == 1

    def test_kernel_wider_than_row_rejected(self, geometry):
        layer = conv("c", 1, 3)
        wide = dataclasses.replace(layer, kernel=(1, 513))
        with pytest.raises(MappingError):
            map_conv_layer(wide, (4, 600, 1), geometry)

    def test_feature_row_wider_than_subarray_rejected(self, geometry):
        layer = conv("c", 1, 3, p=0)
        with pytest.raises(MappingError):
            map_conv_layer(layer, (4, 600, 1), geometry)

    def test_eight_bit_quadruples_slots_exactly(self, geometry):
        layer = conv("c", 8, 3, p=1)
        p4 = map_conv_layer(layer, (16, 16, 8), geometry, operand_bits=4)
        p8 = map_conv_layer(layer, (16, 16, 8), geometry, operand_bits=8)
        assert p8.slot_count == 4 * p4.slot_count
        assert p8.tdm_passes == 4

    def test_isolated_products_utilization_penalty(self, geometry):
        # 1x1 kernel on a single input channel: no accumulation dimension
        lone = map_conv_layer(conv("a", 4, 1), (16, 16, 1), geometry)
        dense = map_conv_layer(conv("b", 4, 3, p=1), (16, 16, 1), geometry)
        assert lone.utilization < dense.utilization
        assert "no accumulation" in lone.notes

    def test_channel_summing_one_by_one_is_not_penalized(self, geometry):
        # 1x1 with many input channels accumulates across subarrays
        proj = map_conv_layer(conv("p", 8, 1), (16, 16, 64), geometry)
        lone = map_conv_layer(conv("a", 8, 1), (16, 16, 1), geometry)
        assert proj.utilization > 10 * lone.utilization

    def test_writeback_plan_bounds(self, geometry):
        plan = map_conv_layer(conv("c", 4, 3, p=1), (8, 8, 2), geometry, operand_bits=8)
        wb = plan.writeback
        assert wb.element_count == 8 * 8 * 4
        assert wb.cells_to_program == wb.element_count * 2
        assert wb.cells_to_program <= wb.element_count * wb.cells_per_element


class TestFcPlans:
    def test_identity_matrix_network(self, geometry, ideal_cell):
        net = NetworkSpec(
            name="ident", input_shape=(2, 2, 1),
            layers=(LayerSpec(name="f", kind="fc", out_features=4, bias=False),),
        )
        resolved = resolve_network(net)
        x = np.array([[[3], [7]], [[1], [15]]], dtype=np.int64)
        weights = {"f": {"w": np.eye(4, dtype=np.int64), "b": np.zeros(4, dtype=np.int64)}}
        outs, _ = execute_network(net, resolved, geometry, ideal_cell, x,
                                  weights=weights, requantize=False)
        # identity weights, raw accumulator: output equals the input exactly
        assert np.array_equal(outs["f"], x.reshape(-1))

    def test_random_gemv_matches_oracle(self, geometry, ideal_cell, rng):
        net = NetworkSpec(
            name="g", input_shape=(4, 4, 4),
            layers=(LayerSpec(name="f", kind="fc", out_features=32),),
        )
        resolved = resolve_network(net)
        x = rng.integers(0, 16, size=(4, 4, 4), dtype=np.int64)
        weights = synthesize_weights(net, rng)
        outs, _ = execute_network(net, resolved, geometry, ideal_cell, x, weights=weights)
        expected = network_oracle(net, weights, x)
        assert np.array_equal(outs["f"], expected["f"])

    def test_multi_slot_plan_for_wide_inputs(self, geometry):
        layer = LayerSpec(name="f", kind="fc", out_features=1, bias=False)
        in_features = 100_000
        plan = map_fc_layer(layer, in_features, geometry, operand_bits=4)
        per_slot_capacity = geometry.subarray_grid * geometry.cols_per_subarray
        assert plan.slot_count == -(-in_features // per_slot_capacity)

    def test_lanes_split_output_neurons(self, geometry):
        layer = LayerSpec(name="f", kind="fc", out_features=4096)
        plan = map_fc_layer(layer, 512, geometry)
        assert plan.lanes == geometry.banks * geometry.group_count


class TestNetworkResolution:
    def test_shape_mismatch_names_offending_layers(self):
        with pytest.raises(ConfigError) as err:
            NetworkSpec(
                name="bad", input_shape=(8, 8, 3),
                layers=(
                    conv("layer3", 4, 3, p=1),
                    conv("layer4", 8, 3, p=1),
                    LayerSpec(name="join", kind="add",
                              from_layers=("layer3", "layer4")),
                ),
            ) and resolve_network(
                NetworkSpec(
                    name="bad", input_shape=(8, 8, 3),
                    layers=(
                        conv("layer3", 4, 3, p=1),
                        conv("layer4", 8, 3, p=1),
                        LayerSpec(name="join", kind="add",
                                  from_layers=("layer3", "layer4")),
                    ),
                )
            )
        msg = str(err.value)
        assert "layer3" in msg and "layer4" in msg

    def test_unknown_source_rejected(self):
        net = NetworkSpec(
            name="bad", input_shape=(8, 8, 3),
            layers=(conv("a", 4, 3, p=1, from_="ghost"),),
        )
        with pytest.raises(ConfigError):
            resolve_network(net)

    def test_fusion_folds_activation_and_pool(self, geometry):
        net = NetworkSpec(
            name="fuse", input_shape=(8, 8, 3),
            layers=(
                conv("c", 4, 3, p=1),
                LayerSpec(name="r", kind="activation"),
                LayerSpec(name="p", kind="pool", op="max", size=2),
            ),
        )
        resolved, plans = build_network_plans(net, geometry)
        by_name = {p.layer_name: p for p in plans}
        assert by_name["r"].notes.startswith("fused into")
        assert by_name["p"].notes.startswith("fused into")
        # conv writeback counts the pooled tensor
        assert by_name["c"].writeback.element_count == 4 * 4 * 4

    def test_shared_input_pool_stays_standalone(self, geometry):
        net = NetworkSpec(
            name="branchy", input_shape=(8, 8, 4),
            layers=(
                conv("stem", 8, 3, p=1),
                conv("b1", 4, 1, from_="stem"),
                LayerSpec(name="b2", kind="pool", op="max", size=2,
                          from_layers=("stem",)),
                conv("b2c", 4, 1, from_="b2"),
            ),
        )
        resolved, plans = build_network_plans(net, geometry)
        by_name = {p.layer_name: p for p in plans}
        assert by_name["b2"].writeback.element_count == 4 * 4 * 8


class TestEndToEnd:
    def _toy_net(self, bits):
        return NetworkSpec(
            name="toy", input_shape=(6, 6, 3), operand_bits=bits,
            layers=(
                conv("c1", 4, 2, s=1, p=0),
                LayerSpec(name="r1", kind="activation"),
                LayerSpec(name="f1", kind="fc", out_features=6),
            ),
        )

    @pytest.mark.parametrize("bits", [4, 8])
    def test_matches_oracle_both_widths(self, geometry, ideal_cell, rng, bits):
        net = self._toy_net(bits)
        resolved = resolve_network(net)
        x = rng.integers(0, 1 << bits, size=(6, 6, 3), dtype=np.int64)
        weights = synthesize_weights(net, rng)
        outs, _ = execute_network(net, resolved, geometry, ideal_cell, x, weights=weights)
        expected = network_oracle(net, weights, x)
        for name in outs:
            assert np.array_equal(outs[name], expected[name]), name

    def test_zero_input_zero_unbiased_outputs(self, geometry, ideal_cell, rng):
        net = NetworkSpec(
            name="z", input_shape=(5, 5, 2),
            layers=(conv("c", 3, 3, p=1, bias=False),),
        )
        resolved = resolve_network(net)
        x = np.zeros((5, 5, 2), dtype=np.int64)
        outs, _ = execute_network(net, resolved, geometry, ideal_cell, x,
                                  weights=synthesize_weights(net, rng))
        assert not outs["c"].any()

    def test_emitted_schedules_are_interference_safe(self, geometry, ideal_cell, rng):
        net = self._toy_net(4)
        resolved = resolve_network(net)
        x = rng.integers(0, 16, size=(6, 6, 3), dtype=np.int64)
        _, collector = execute_network(net, resolved, geometry, ideal_cell, x,
                                       weights=synthesize_weights(net, rng))
        assert len(collector.slots) > 0
        assert check_interference_safety(collector.slots).ok

    def test_simulate_network_attaches_costs(self, geometry, rng):
        cfg = load_config()
        net = self._toy_net(4)
        x = rng.integers(0, 16, size=(6, 6, 3), dtype=np.int64)
        run = simulate_network(
            net, geometry, cfg.models, input_tensor=x, exact_mode=True, rng=rng
        )
        assert len(run.results) == len(net.layers)
        assert run.outputs is not None
        assert run.total_mac_count > 0
        assert all(r.total_energy_pj >= 0 for r in run.results)


class TestPlanExport:
    def test_plan_to_dict_is_json_ready(self, geometry):
        import json as _json

        plan = map_conv_layer(conv("c", 4, 3, p=1), (8, 8, 2), geometry)
        doc = plan.to_dict()
        text = _json.dumps(doc)
        assert "slot_count" in text
        assert doc["writeback"]["cells_to_program"] == plan.writeback.cells_to_program
