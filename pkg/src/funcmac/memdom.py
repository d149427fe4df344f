"""Simulated memory domains protecting the runtime call-stack records.

Models one process address space as a table of 4-kB domain pages with a
first-fit block allocator and per-thread page privileges. Two threads
exist per monitored runtime: the main runtime, which may write stack-domain
pages only inside explicit grant/revoke windows around frame creation and
deletion, and the stack inspector, which reads the domain while answering
an access-control upcall. Everything is symbolic: no real memory is
protected, which keeps the model portable and deterministic.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field

PAGE_SIZE = 4096
STACK_DOMAIN = "stack"

MAIN_RUNTIME = "main-runtime"
STACK_INSPECTOR = "stack-inspector"


class UnknownPageError(Exception):
    pass


class OutOfModelMemory(Exception):
    pass


class PagePriv(enum.IntEnum):
    NONE = 0
    READ = 1
    READ_WRITE = 2


#: Threads fall back to read access on domain pages they hold no explicit
#: privilege for; writes always require an explicit grant.
DOMAIN_BASELINE = PagePriv.READ


@dataclass(frozen=True)
class Fault:
    """Denied memory access; returned as a value, never raised."""

    thread: str
    page: int
    kind: str


@dataclass
class Block:
    offset: int
    length: int
    allocated: bool


@dataclass
class DomainPage:
    page_id: int
    domain: str = STACK_DOMAIN
    blocks: list[Block] = field(default_factory=lambda: [Block(0, PAGE_SIZE, False)])

    def free_bytes(self) -> int:
        return sum(b.length for b in self.blocks if not b.allocated)

    def has_free_chunk(self, size: int = 1) -> bool:
        return any(not b.allocated and b.length >= size for b in self.blocks)


@dataclass
class ThreadPolicy:
    thread: str
    page_privs: dict[int, PagePriv] = field(default_factory=dict)


@dataclass(frozen=True)
class BlockHandle:
    page_id: int
    offset: int
    length: int


class AddressSpaceModel:
    """One process's domain pages plus the two built-in thread policies."""

    def __init__(self, page_cap: int = 4096):
        self.pages: dict[int, DomainPage] = {}
        self.policies: dict[str, ThreadPolicy] = {
            MAIN_RUNTIME: ThreadPolicy(MAIN_RUNTIME),
            STACK_INSPECTOR: ThreadPolicy(STACK_INSPECTOR),
        }
        self.active_thread = MAIN_RUNTIME
        self.page_cap = page_cap
        self.grant_count = 0
        self.revoke_count = 0
        self.fault_count = 0
        self._next_page = 0

    # -- page privileges ---------------------------------------------------

    def priv_for(self, thread: str, page_id: int) -> PagePriv:
        policy = self.policies[thread]
        return policy.page_privs.get(page_id, DOMAIN_BASELINE)

    def set_page_priv(self, thread: str, page_id: int, priv: PagePriv) -> None:
        """Adjust one thread's privilege on one domain page."""
        if page_id not in self.pages:
            raise UnknownPageError(f"page {page_id} is not domain-protected")
        policy = self.policies[thread]
        policy.page_privs[page_id] = priv
        if priv is PagePriv.READ_WRITE:
            self.grant_count += 1
        else:
            self.revoke_count += 1

    def access(self, thread: str, page_id: int, offset: int, kind: str) -> Fault | None:
        """Check one read or write; returns a Fault or None for success."""
        if not 0 <= offset < PAGE_SIZE:
            raise ValueError(f"offset {offset} outside page")
        if kind not in ("read", "write"):
            raise ValueError(f"unknown access kind {kind!r}")
        if page_id not in self.pages:
            return None  # not domain-protected: unrestricted
        needed = PagePriv.READ_WRITE if kind == "write" else PagePriv.READ
        if self.priv_for(thread, page_id) >= needed:
            return None
        self.fault_count += 1
        return Fault(thread, page_id, kind)

    # -- stack-domain allocator --------------------------------------------

    def _add_page(self) -> DomainPage:
        if len(self.pages) >= self.page_cap:
            raise OutOfModelMemory(f"domain page cap {self.page_cap} reached")
        page = DomainPage(self._next_page)
        self.pages[page.page_id] = page
        self._next_page += 1
        return page

    def alloc(self, size: int) -> BlockHandle:
        """First-fit block allocation in the stack domain.

        A new-frame buffer's address is unknown until placed, so write
        access is opened on every domain page holding a free chunk for the
        duration of the operation and restored afterward.
        """
        if not 0 < size <= PAGE_SIZE:
            raise ValueError(f"allocation size {size} outside (0, {PAGE_SIZE}]")
        window = {
            p.page_id: self.priv_for(MAIN_RUNTIME, p.page_id)
            for p in self.pages.values()
            if p.has_free_chunk()
        }
        for page_id in window:
            self.set_page_priv(MAIN_RUNTIME, page_id, PagePriv.READ_WRITE)
        try:
            target = None
            for page in self.pages.values():
                if page.has_free_chunk(size):
                    target = page
                    break
            if target is None:
                target = self._add_page()
                window[target.page_id] = DOMAIN_BASELINE
                self.set_page_priv(MAIN_RUNTIME, target.page_id, PagePriv.READ_WRITE)
            handle = self._place(target, size)
            fault = self.access(MAIN_RUNTIME, handle.page_id, handle.offset, "write")
            assert fault is None, "write inside an open allocation window cannot fault"
            return handle
        finally:
            for page_id, previous in window.items():
                self.set_page_priv(MAIN_RUNTIME, page_id, previous)

    def _place(self, page: DomainPage, size: int) -> BlockHandle:
        for i, block in enumerate(page.blocks):
            if block.allocated or block.length < size:
                continue
            remainder = block.length - size
            block.length = size
            block.allocated = True
            if remainder:
                page.blocks.insert(i + 1, Block(block.offset + size, remainder, False))
            return BlockHandle(page.page_id, block.offset, size)
        raise AssertionError("no free chunk in page selected for placement")

    def free(self, handle: BlockHandle) -> None:
        """Release a block, writing its page inside a grant/revoke window."""
        page = self.pages.get(handle.page_id)
        if page is None:
            raise UnknownPageError(f"page {handle.page_id} is not domain-protected")
        previous = self.priv_for(MAIN_RUNTIME, page.page_id)
        self.set_page_priv(MAIN_RUNTIME, page.page_id, PagePriv.READ_WRITE)
        try:
            fault = self.access(MAIN_RUNTIME, handle.page_id, handle.offset, "write")
            assert fault is None
            for i, block in enumerate(page.blocks):
                if block.offset == handle.offset and block.allocated:
                    if block.length != handle.length:
                        raise ValueError("handle does not match the allocated block")
                    block.allocated = False
                    self._coalesce(page, i)
                    return
            raise ValueError(f"no allocated block at page {handle.page_id} offset {handle.offset}")
        finally:
            self.set_page_priv(MAIN_RUNTIME, page.page_id, previous)

    @staticmethod
    def _coalesce(page: DomainPage, index: int) -> None:
        blocks = page.blocks
        if index + 1 < len(blocks) and not blocks[index + 1].allocated:
            blocks[index].length += blocks[index + 1].length
            del blocks[index + 1]
        if index > 0 and not blocks[index - 1].allocated:
            blocks[index - 1].length += blocks[index].length
            del blocks[index]

    # -- process lifecycle ---------------------------------------------------

    def fork(self) -> "AddressSpaceModel":
        """Child copy of the address space with stack-domain writes revoked.

        Pages and thread policies are deep-copied; any write privilege a
        thread held on a stack-domain page at fork time is dropped back to
        the read baseline so the child cannot touch frames the parent had
        open for writing.
        """
        child = AddressSpaceModel(self.page_cap)
        child.pages = copy.deepcopy(self.pages)
        child.policies = copy.deepcopy(self.policies)
        child.active_thread = self.active_thread
        child.grant_count = self.grant_count
        child.revoke_count = self.revoke_count
        child.fault_count = self.fault_count
        child._next_page = self._next_page
        for policy in child.policies.values():
            for page_id, priv in list(policy.page_privs.items()):
                if priv is PagePriv.READ_WRITE and child.pages[page_id].domain == STACK_DOMAIN:
                    policy.page_privs[page_id] = DOMAIN_BASELINE
        return child


def fork_address_space(parent: AddressSpaceModel) -> AddressSpaceModel:
    return parent.fork()
