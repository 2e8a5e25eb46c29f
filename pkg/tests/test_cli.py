"""The command-line interface: exit codes, output shapes, file handling.

Commands run in-process through ``main`` so exit codes and streams can be
asserted directly.
"""

from __future__ import annotations

import os
import stat

import pytest

from keyauth import (
    AttributeStore,
    KeyType,
    generate_chat_keypair,
    generate_identity_keypair,
    sign_public_key,
)
from keyauth.cli import (
    EXIT_ERROR,
    EXIT_FINGERPRINT_MISMATCH,
    EXIT_KEY_CHANGED,
    EXIT_MISSING_KEY,
    EXIT_OK,
    EXIT_SIGNATURE_INVALID,
    EXIT_USAGE,
    group_fingerprint_hex,
    load_own_material,
    main,
)


@pytest.fixture
def env(tmp_path):
    """Paths plus a runner returning (exit_code, stdout, stderr)."""

    store = tmp_path / "store.json"

    class Env:
        store_path = store
        base = tmp_path

        def home(self, user):
            return tmp_path / user

        def run(self, *args, capsys):
            code = main([str(a) for a in args])
            captured = capsys.readouterr()
            return code, captured.out, captured.err

        def user_args(self, user):
            return ["--store", store, "--home", self.home(user), "--user", user]

    return Env()


def init_user(env, capsys, user):
    code, out, err = env.run(*env.user_args(user), "init", capsys=capsys)
    assert code == EXIT_OK, err
    return out


class TestInit:
    def test_fresh_init_reports_everything(self, env, capsys):
        out = init_user(env, capsys, "alice")
        lines = out.strip().splitlines()
        assert lines == [
            "generate identity-ed25519",
            "generate chat-x25519",
            "generate sharing-rsa",
            "publish ed25519_pub",
            "publish x25519_pub",
            "publish rsa_pub",
            "publish sig_x25519",
            "publish sig_rsa",
        ]

    def test_rerun_reports_nothing(self, env, capsys):
        init_user(env, capsys, "alice")
        code, out, _ = env.run(*env.user_args("alice"), "init", capsys=capsys)
        assert code == EXIT_OK
        assert out.strip() == "nothing to repair"

    def test_private_files_are_0600(self, env, capsys):
        init_user(env, capsys, "alice")
        for name in ("identity-ed25519.sk", "chat-x25519.sk", "sharing-rsa.sk"):
            mode = stat.S_IMODE(os.stat(env.home("alice") / name).st_mode)
            assert mode == 0o600, name

    def test_unwritable_home_leaves_store_untouched(self, env, capsys, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        code, _, err = env.run(
            "--store",
            env.store_path,
            "--home",
            blocker / "home",  # parent is a file: mkdir must fail
            "--user",
            "alice",
            "init",
            capsys=capsys,
        )
        assert code == EXIT_ERROR
        assert "error[init]" in err
        assert not env.store_path.exists()

    def test_missing_options_are_usage_errors(self, env, capsys):
        code, _, err = env.run("--user", "alice", "init", capsys=capsys)
        assert code == EXIT_USAGE
        assert "--store" in err and "--home" in err

    def test_machine_mode(self, env, capsys):
        code, out, _ = env.run(
            *env.user_args("alice"), "--machine", "init", capsys=capsys
        )
        assert code == EXIT_OK
        rows = [line.split("\t") for line in out.strip().splitlines()]
        assert ["generate", "identity-ed25519"] in rows
        assert ["publish", "sig_rsa"] in rows

    def test_corrupt_private_file(self, env, capsys):
        init_user(env, capsys, "alice")
        (env.home("alice") / "identity-ed25519.sk").write_text("???not base64\n")
        code, _, err = env.run(*env.user_args("alice"), "init", capsys=capsys)
        assert code == EXIT_ERROR
        assert "error[init]" in err


class TestCredentials:
    def test_own_fingerprint_grouped(self, env, capsys):
        init_user(env, capsys, "alice")
        code, out, _ = env.run(*env.user_args("alice"), "credentials", capsys=capsys)
        assert code == EXIT_OK
        groups = out.strip().split(" ")
        assert len(groups) == 8
        assert all(len(g) == 5 for g in groups)

    def test_machine_mode_is_plain_hex(self, env, capsys):
        init_user(env, capsys, "alice")
        code, out, _ = env.run(
            *env.user_args("alice"), "--machine", "credentials", capsys=capsys
        )
        assert code == EXIT_OK
        assert len(out.strip()) == 40
        int(out.strip(), 16)

    def test_uninitialised_user(self, env, capsys):
        code, _, err = env.run(*env.user_args("nobody"), "credentials", capsys=capsys)
        assert code == EXIT_MISSING_KEY
        assert "error[missing-key]" in err

    def test_contact_fingerprint_tracks_seen(self, env, capsys):
        init_user(env, capsys, "alice")
        init_user(env, capsys, "bob")
        code, out, _ = env.run(
            *env.user_args("alice"), "credentials", "bob", capsys=capsys
        )
        assert code == EXIT_OK
        code, ring_out, _ = env.run(
            "--home", env.home("alice"), "--machine", "ring", "identity", capsys=capsys
        )
        assert code == EXIT_OK
        row = ring_out.strip().split("\t")
        assert row[0] == "identity-ed25519"
        assert row[1] == "bob"
        assert row[2] == out.strip().replace(" ", "")
        assert row[3] == "seen"

    def test_contact_and_own_agree(self, env, capsys):
        init_user(env, capsys, "bob")
        init_user(env, capsys, "alice")
        _, own, _ = env.run(
            *env.user_args("bob"), "--machine", "credentials", capsys=capsys
        )
        _, seen, _ = env.run(
            *env.user_args("alice"), "--machine", "credentials", "bob", capsys=capsys
        )
        assert own == seen


class TestVerify:
    def test_match_records_comparison(self, env, capsys):
        init_user(env, capsys, "alice")
        init_user(env, capsys, "bob")
        _, bob_fp, _ = env.run(
            *env.user_args("bob"), "--machine", "credentials", capsys=capsys
        )
        env.run(*env.user_args("alice"), "credentials", "bob", capsys=capsys)
        code, out, _ = env.run(
            *env.user_args("alice"), "verify", "bob", bob_fp.strip(), capsys=capsys
        )
        assert code == EXIT_OK
        _, ring_out, _ = env.run(
            "--home", env.home("alice"), "--machine", "ring", "identity", capsys=capsys
        )
        assert ring_out.strip().split("\t")[3] == "fingerprint-comparison"

    def test_grouped_uppercase_accepted_as_separate_args(self, env, capsys):
        init_user(env, capsys, "alice")
        init_user(env, capsys, "bob")
        _, bob_fp, _ = env.run(
            *env.user_args("bob"), "--machine", "credentials", capsys=capsys
        )
        grouped = group_fingerprint_hex(bob_fp.strip()).upper().split(" ")
        env.run(*env.user_args("alice"), "credentials", "bob", capsys=capsys)
        code, _, _ = env.run(
            *env.user_args("alice"), "verify", "bob", *grouped, capsys=capsys
        )
        assert code == EXIT_OK

    def test_mismatch_exits_2_with_warning(self, env, capsys):
        init_user(env, capsys, "alice")
        init_user(env, capsys, "bob")
        env.run(*env.user_args("alice"), "credentials", "bob", capsys=capsys)
        code, _, err = env.run(
            *env.user_args("alice"), "verify", "bob", "0" * 40, capsys=capsys
        )
        assert code == EXIT_FINGERPRINT_MISMATCH
        assert "DO NOT TRUST" in err
        # the pin itself is unharmed
        _, ring_out, _ = env.run(
            "--home", env.home("alice"), "--machine", "ring", "identity", capsys=capsys
        )
        assert ring_out.strip().split("\t")[3] == "seen"

    def test_untracked_contact_is_an_error(self, env, capsys):
        init_user(env, capsys, "alice")
        code, _, err = env.run(
            *env.user_args("alice"), "verify", "bob", "0" * 40, capsys=capsys
        )
        assert code == EXIT_ERROR
        assert "error[missing-record]" in err


class TestFetch:
    def test_first_fetch_three_round_trips(self, env, capsys):
        init_user(env, capsys, "alice")
        init_user(env, capsys, "bob")
        code, out, _ = env.run(
            *env.user_args("alice"), "--machine", "fetch", "bob", "chat", capsys=capsys
        )
        assert code == EXIT_OK
        label, key_b64, method, fetches = out.strip().split("\t")
        assert label == "chat-x25519"
        assert method == "signature-verified"
        assert fetches == "3"

    def test_reload_single_round_trip(self, env, capsys):
        init_user(env, capsys, "alice")
        init_user(env, capsys, "bob")
        env.run(*env.user_args("alice"), "fetch", "bob", "sharing", capsys=capsys)
        code, out, _ = env.run(
            *env.user_args("alice"),
            "--machine",
            "fetch",
            "bob",
            "sharing",
            capsys=capsys,
        )
        assert code == EXIT_OK
        assert out.strip().split("\t")[3] == "1"

    def test_identity_fetch(self, env, capsys):
        init_user(env, capsys, "alice")
        init_user(env, capsys, "bob")
        code, out, _ = env.run(
            *env.user_args("alice"),
            "--machine",
            "fetch",
            "bob",
            "identity-ed25519",
            capsys=capsys,
        )
        assert code == EXIT_OK
        assert out.strip().split("\t")[2] == "seen"

    def test_missing_contact_exits_5(self, env, capsys):
        init_user(env, capsys, "alice")
        code, _, err = env.run(
            *env.user_args("alice"), "fetch", "ghost", "chat", capsys=capsys
        )
        assert code == EXIT_MISSING_KEY
        assert "error[missing-key]" in err

    def test_substituted_identity_exits_2(self, env, capsys):
        init_user(env, capsys, "alice")
        init_user(env, capsys, "bob")
        env.run(*env.user_args("alice"), "fetch", "bob", "identity", capsys=capsys)
        store = AttributeStore(env.store_path)
        store.publish("bob", "ed25519_pub", generate_identity_keypair().public)
        code, _, err = env.run(
            *env.user_args("alice"), "fetch", "bob", "identity", capsys=capsys
        )
        assert code == EXIT_FINGERPRINT_MISMATCH
        assert "error[fingerprint-mismatch]" in err

    def test_substituted_subkey_exits_3(self, env, capsys):
        init_user(env, capsys, "alice")
        init_user(env, capsys, "bob")
        store = AttributeStore(env.store_path)
        store.publish("bob", "x25519_pub", generate_chat_keypair().public)
        code, _, err = env.run(
            *env.user_args("alice"), "fetch", "bob", "chat", capsys=capsys
        )
        assert code == EXIT_SIGNATURE_INVALID
        assert "error[signature-invalid]" in err

    def test_legitimate_rotation_exits_4(self, env, capsys):
        init_user(env, capsys, "alice")
        init_user(env, capsys, "bob")
        env.run(*env.user_args("alice"), "fetch", "bob", "chat", capsys=capsys)
        # bob rotates properly: new key, new valid signature
        identity = load_own_material(env.home("bob")).identity
        new_chat = generate_chat_keypair()
        store = AttributeStore(env.store_path)
        store.publish("bob", "x25519_pub", new_chat.public)
        store.publish(
            "bob",
            "sig_x25519",
            sign_public_key(identity, KeyType.CHAT_X25519, new_chat.public).sig,
        )
        code, _, err = env.run(
            *env.user_args("alice"), "fetch", "bob", "chat", capsys=capsys
        )
        assert code == EXIT_KEY_CHANGED
        assert "error[key-changed-warning]" in err


class TestRing:
    def test_empty_ring_no_lines(self, env, capsys):
        init_user(env, capsys, "alice")
        code, out, _ = env.run(
            "--home", env.home("alice"), "ring", "chat", capsys=capsys
        )
        assert code == EXIT_OK
        assert out == ""

    def test_all_rings_after_fetch(self, env, capsys):
        init_user(env, capsys, "alice")
        init_user(env, capsys, "bob")
        env.run(*env.user_args("alice"), "fetch", "bob", "chat", capsys=capsys)
        code, out, _ = env.run(
            "--home", env.home("alice"), "--machine", "ring", "--all", capsys=capsys
        )
        assert code == EXIT_OK
        rows = [line.split("\t") for line in out.strip().splitlines()]
        assert ["identity-ed25519", "bob"] == rows[0][:2]
        assert ["chat-x25519", "bob"] == rows[1][:2]
        assert rows[1][3] == "signature-verified"
        assert rows[0][4] == "0"  # trust is stored but unused

    def test_without_type_or_all_is_usage_error(self, env, capsys):
        init_user(env, capsys, "alice")
        code, _, err = env.run("--home", env.home("alice"), "ring", capsys=capsys)
        assert code == EXIT_USAGE

    def test_corrupt_ring_file_diagnosed(self, env, capsys):
        init_user(env, capsys, "alice")
        init_user(env, capsys, "bob")
        env.run(*env.user_args("alice"), "fetch", "bob", "chat", capsys=capsys)
        path = env.home("alice") / "chat-x25519.ring"
        blob = bytearray(path.read_bytes())
        blob[len(blob) // 2] ^= 0x10
        path.write_bytes(bytes(blob))
        code, _, err = env.run(
            "--home", env.home("alice"), "ring", "chat", capsys=capsys
        )
        assert code == EXIT_ERROR
        assert "error[ring-checksum-mismatch]" in err
        assert "checksum" in err


class TestSimulate:
    @pytest.mark.parametrize(
        "scenario",
        [
            "mitm-identity-pre",
            "mitm-identity-post",
            "mitm-subkey-pre",
            "mitm-subkey-post",
            "strip-signature",
        ],
    )
    def test_each_scenario_passes(self, env, capsys, scenario):
        code, out, _ = env.run(
            "simulate", scenario, "--reps", "2", "--seed", "5", capsys=capsys
        )
        assert code == EXIT_OK
        assert "result: 2/2" in out

    def test_transcript_shows_expected_vs_observed(self, env, capsys):
        code, out, _ = env.run(
            "simulate", "mitm-identity-post", "--seed", "1", capsys=capsys
        )
        assert code == EXIT_OK
        assert "expected [fingerprint-mismatch]" in out
        assert "observed fingerprint-mismatch" in out

    def test_blind_spot_is_documented_in_transcript(self, env, capsys):
        code, out, _ = env.run(
            "simulate", "mitm-identity-pre", "--seed", "1", capsys=capsys
        )
        assert code == EXIT_OK
        assert "undetectable" in out

    def test_machine_mode_rows(self, env, capsys):
        code, out, _ = env.run(
            "--machine", "simulate", "strip-signature", "--seed", "2", capsys=capsys
        )
        assert code == EXIT_OK
        lines = out.strip().splitlines()
        rep_row = lines[0].split("\t")
        assert rep_row[0] == "strip-signature"
        assert rep_row[-1] == "ok"
        assert lines[-1].split("\t")[0] == "result"

    def test_unknown_scenario_is_usage_error(self, env, capsys):
        code, _, err = env.run("simulate", "mitm-quantum", capsys=capsys)
        assert code == EXIT_USAGE

    def test_zero_reps_is_usage_error(self, env, capsys):
        code, _, _ = env.run(
            "simulate", "strip-signature", "--reps", "0", capsys=capsys
        )
        assert code == EXIT_USAGE


class TestParsing:
    def test_help_exits_zero(self, env, capsys):
        code, out, _ = env.run("--help", capsys=capsys)
        assert code == EXIT_OK
        assert "simulate" in out

    def test_no_command_is_usage_error(self, env, capsys):
        code, _, _ = env.run(capsys=capsys)
        assert code == EXIT_USAGE

    def test_unknown_key_type_is_usage_error(self, env, capsys):
        init_user(env, capsys, "alice")
        code, _, _ = env.run(
            *env.user_args("alice"), "fetch", "bob", "tls", capsys=capsys
        )
        assert code == EXIT_USAGE
