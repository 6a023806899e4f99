import csv
import ipaddress
import logging
from collections import defaultdict
from typing import Iterable, Optional

from .eclipse_model import validate_pool
from .schemas.eclipse import SybilPool
from .schemas.mapping import MatchCounts, MatchPair, MatchReport, NodeRecord, ParseIssue
from .sim_core import RandomSource
from .simulation_exception import MappingParseException
from .utils import MAPPING_COLUMNS

ONION_SUFFIX = ".onion"


def split_endpoint(endpoint: str) -> tuple[str, Optional[int]]:
    """
    Split an endpoint into its matchable host and optional port. Raises ValueError
    on anything that is neither an IP address nor an onion hostname.
    """
    endpoint = endpoint.strip()
    host, port = endpoint, None

    if endpoint.startswith("["):
        closing = endpoint.find("]")
        if closing < 0:
            raise ValueError(f"Unclosed bracket in `{endpoint}`")
        host, rest = endpoint[1:closing], endpoint[closing + 1 :]
        if rest:
            if not rest.startswith(":"):
                raise ValueError(f"Unexpected text after bracketed address in `{endpoint}`")
            port = int(rest[1:])
    elif endpoint.count(":") == 1:
        host, port_text = endpoint.split(":")
        port = int(port_text)

    if port is not None and not 0 < port < 65536:
        raise ValueError(f"Port {port} out of range")

    if host.lower().endswith(ONION_SUFFIX):
        return host, port
    return str(ipaddress.ip_address(host)), port


def parse_node_list(
    lines: Iterable[str], source: str = "<input>"
) -> tuple[list[NodeRecord], list[ParseIssue]]:
    """
    Parse node records, collecting malformed lines as issues instead of stopping.

    One `id,endpoint` or `id@endpoint` per line; `#` starts a comment.
    """
    records, issues = [], []
    for line_number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue

        separator = "," if "," in line else "@"
        node_id, _, endpoint = line.partition(separator)
        node_id, endpoint = node_id.strip(), endpoint.strip()
        try:
            if not node_id or not endpoint:
                raise ValueError("expected `id,endpoint` or `id@endpoint`")
            host, port = split_endpoint(endpoint)
        except ValueError as e:
            issues.append(
                ParseIssue(source=source, line_number=line_number, line=raw.rstrip("\n"), reason=str(e))
            )
            logging.getLogger(__name__).warning(f"{source}:{line_number}: skipped, {e}")
            continue

        records.append(NodeRecord(id=node_id, endpoint=endpoint, host=host, port=port))

    return records, issues


def load_node_list(path: str) -> tuple[list[NodeRecord], list[ParseIssue]]:
    try:
        with open(path, "r") as fin:
            return parse_node_list(fin.readlines(), source=path)
    except (OSError, UnicodeDecodeError) as e:
        raise MappingParseException(f"Unable to read node list {path}", {"path": path, "error": str(e)})


def correlate_by_ip(
    bitcoin_list: list[NodeRecord],
    lightning_list: list[NodeRecord],
    issues: Iterable[ParseIssue] = (),
) -> MatchReport:
    """
    Pair every Bitcoin record with every Lightning record on the same host.
    Ports are ignored. Pairs are ordered by shared host, then by ids.
    """
    lightning_by_host: dict[str, list[NodeRecord]] = defaultdict(list)
    for record in lightning_list:
        lightning_by_host[record.host].append(record)

    pairs = [
        MatchPair(bitcoin_id=bitcoin.id, lightning_id=lightning.id, endpoint=bitcoin.host)
        for bitcoin in bitcoin_list
        for lightning in lightning_by_host.get(bitcoin.host, [])
    ]
    pairs.sort(key=lambda pair: (pair.endpoint, pair.bitcoin_id, pair.lightning_id))

    counts = MatchCounts(
        bitcoin_total=len(bitcoin_list),
        lightning_total=len(lightning_list),
        matches=len({pair.endpoint for pair in pairs}),
    )
    logging.getLogger(__name__).info(
        f"{counts.matches} shared hosts between {counts.bitcoin_total} Bitcoin and "
        f"{counts.lightning_total} Lightning records"
    )
    return MatchReport(pairs=pairs, counts=counts, issues=list(issues))


def write_matches_csv(report: MatchReport, path: str) -> None:
    with open(path, "w", newline="") as fout:
        writer = csv.writer(fout)
        writer.writerow(MAPPING_COLUMNS)
        for pair in report.pairs:
            writer.writerow([pair.bitcoin_id, pair.lightning_id, pair.endpoint])


def first_spy_direct_probability(pool: SybilPool) -> float:
    """
    Chance that a light client picked at least one sybil among its C peers,
    1 - (N_h / (N_h + N_a))^C, which is all the first-spy estimator needs.
    """
    validate_pool(pool)
    return 1.0 - (pool.honest_nodes / pool.total_nodes) ** pool.outbound_count


def simulate_origin_inference(
    pool: SybilPool, trials: int, rng: RandomSource, with_replacement: bool = True
) -> float:
    """
    Monte-Carlo rate at which the attacker infers a light client's transaction
    origin: a trial succeeds when at least one of the client's peers is a sybil.
    """
    validate_pool(pool)
    if trials < 1:
        raise ValueError(f"Need at least one trial, got {trials}")

    if with_replacement:
        sybil = rng.uniforms((trials, pool.outbound_count)) < (
            pool.attacker_nodes / pool.total_nodes
        )
        inferred = sybil.any(axis=1)
    else:
        inferred = (
            rng.hypergeometric(pool.attacker_nodes, pool.honest_nodes, pool.outbound_count, trials)
            > 0
        )

    return float(inferred.mean())
