import logging
import queue
import struct
import threading
from collections import namedtuple

from .errors import ProtocolViolationError
from .partition import owner_of_row
from .sym_assign import assigned_columns

# (i32 row, i32 col, f64 value), little-endian, no padding
TRIPLET_STRUCT = struct.Struct('<iid')
RECORD_SIZE = TRIPLET_STRUCT.size

Triplet = namedtuple('Triplet', ['global_row', 'global_col', 'value'])


class ExchangePlan:
    def __init__(self, me, send_counts, recv_counts):
        self.me = me
        self.send_counts = list(send_counts)
        self.recv_counts = list(recv_counts)

    def total_sent(self):
        return sum(self.send_counts)

    def total_received(self):
        return sum(self.recv_counts)

    def peers(self):
        """Ranks this rank exchanges at least one record with"""
        return [k for k in range(len(self.send_counts))
                if self.send_counts[k] or self.recv_counts[k]]


def plan_exchange(p, me):
    send_counts = [0] * p.ranks
    recv_counts = [0] * p.ranks

    for row in p.rows_of(me):
        for col in assigned_columns(p.n, row).columns:
            dest = owner_of_row(p, col)
            if col != row and dest != me:
                send_counts[dest] += 1

    # Re-evaluate the peers' assignment rule instead of asking them.
    for peer in range(p.ranks):
        if peer == me:
            continue
        for row in p.rows_of(peer):
            for col in assigned_columns(p.n, row).columns:
                if owner_of_row(p, col) == me:
                    recv_counts[peer] += 1

    return ExchangePlan(me, send_counts, recv_counts)


def pack(cells):
    buffer = bytearray(RECORD_SIZE * len(cells))
    for k, (row, col, value) in enumerate(cells):
        TRIPLET_STRUCT.pack_into(buffer, k * RECORD_SIZE, row, col, value)
    return bytes(buffer)


def decode(buffer):
    if len(buffer) % RECORD_SIZE:
        raise ProtocolViolationError(
            f'buffer of {len(buffer)} bytes is not a whole number of {RECORD_SIZE}-byte records')
    return [Triplet(*fields) for fields in TRIPLET_STRUCT.iter_unpack(buffer)]


def unpack_apply(buffer, p, me, block):
    for row, col, value in decode(buffer):
        # The sender computed (row, col); this rank owns the mirrored (col, row).
        if not (0 <= row < p.n and 0 <= col < p.n) or owner_of_row(p, col) != me:
            raise ProtocolViolationError(
                f'rank {me} received cell ({row}, {col}) whose mirror it does not own')
        block.assign(col, row, value)
    return block


def verify_inbox(inbox, plan):
    """Check that each source delivered exactly the planned number of records"""
    received = [0] * len(plan.recv_counts)
    for source, buffer in inbox:
        received[source] += len(buffer) // RECORD_SIZE
    if received != plan.recv_counts:
        raise ProtocolViolationError(
            f'rank {plan.me} expected {plan.total_received()} records as {plan.recv_counts} per source, '
            f'got {received}')


class RankNetwork:
    """In-process message fabric standing in for non-blocking send/receive.

    Each rank has one mailbox. A batch is posted whole and at most once per
    (source, destination) pair.
    """

    def __init__(self, ranks):
        self.ranks = ranks
        self.logger = logging.getLogger('RankNetwork')
        self.mailboxes = [queue.Queue() for _ in range(ranks)]
        self.posted = set()
        self.lock = threading.Lock()

    def post(self, source, dest, buffer):
        with self.lock:
            if (source, dest) in self.posted:
                raise ProtocolViolationError(f'second batch from rank {source} to rank {dest}')
            self.posted.add((source, dest))
        self.logger.debug(f'rank {source} -> rank {dest}: {len(buffer) // RECORD_SIZE} records')
        self.mailboxes[dest].put((source, buffer))

    def send_outbox(self, source, outbox, plan):
        """Post one rank's per-destination batches after checking them against its plan"""
        missing = [dest for dest, count in enumerate(plan.send_counts) if count and dest not in outbox]
        if missing:
            raise ProtocolViolationError(f'rank {source} has no batch for planned ranks {missing}')
        for dest, buffer in sorted(outbox.items()):
            expected = plan.send_counts[dest] * RECORD_SIZE
            if len(buffer) != expected:
                raise ProtocolViolationError(
                    f'rank {source} -> rank {dest}: {len(buffer)} bytes, plan says {expected}')
            self.post(source, dest, buffer)
        self.logger.debug(f'rank {source} posted {len(outbox)} batches, {plan.total_sent()} records')

    def receive(self, me, plan, rng=None):
        """Collect and verify a rank's inbox; rng (a numpy Generator) permutes the arrival order"""
        inbox = self.collect(me)
        if rng is not None:
            inbox = [inbox[k] for k in rng.permutation(len(inbox))]
        verify_inbox(inbox, plan)
        return inbox

    def collect(self, me):
        """Drain everything delivered to a rank so far"""
        inbox = []
        while True:
            try:
                inbox.append(self.mailboxes[me].get_nowait())
            except queue.Empty:
                return inbox

    def run_ranks(self, work, concurrent=False):
        """Run work(rank) for every rank and return the results in rank order.

        concurrent=True gives each rank its own thread; otherwise ranks run
        round-robin on the calling thread. Results must not depend on the mode.
        """
        if not concurrent:
            return [work(me) for me in range(self.ranks)]

        results = [None] * self.ranks
        failures = [None] * self.ranks

        def run_rank(me):
            try:
                results[me] = work(me)
            except Exception as e:
                self.logger.error(f'rank {me} failed: {e}')
                failures[me] = e

        threads = [threading.Thread(target=run_rank, args=(me,), daemon=True)
                   for me in range(self.ranks)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        for failure in failures:
            if failure is not None:
                raise failure
        return results



def deliver_all(outboxes, plans, rng=None, network=None):
    """Post every rank's per-destination buffers and return the verified per-rank inboxes.

    outboxes[k] maps destination rank to the packed buffer rank k sends it.
    rng (a numpy Generator) permutes each rank's arrival order.
    """
    network = network or RankNetwork(len(outboxes))
    for source, outbox in enumerate(outboxes):
        network.send_outbox(source, outbox, plans[source])
    inboxes = [network.receive(me, plans[me], rng=rng) for me in range(network.ranks)]
    network.logger.info(f'delivered {sum(len(inbox) for inbox in inboxes)} batches across {network.ranks} ranks')
    return inboxes
