"""Purpose-aware topic-based publish-subscribe broker.

Publishers (or third parties) bind allowed and prohibited intended purposes
to topic filters via reservations; subscribers declare one access purpose
per subscription; the broker delivers a message only when the access purpose
is compatible with the topic's effective intended purposes.
"""

from .purposes import (
    EmptyMerge,
    IpTuple,
    MalformedPurpose,
    Purpose,
    PurposeSet,
    ancestors_or_self,
    closure_contains,
    is_compatible,
    merge_restrictive,
    merge_union,
    parse_purpose,
)
from .topics import (
    MalformedTopic,
    TopicFilter,
    TopicName,
    covers,
    matches,
    overlaps,
    parse_filter,
    parse_topic,
)
from .commands import (
    ApSubscribe,
    CommandKind,
    Keywords,
    MalformedCommand,
    Presubscribe,
    Reserve,
    SetOption,
    UnknownCommand,
    classify,
    parse_ap,
    parse_presub,
    parse_reserve,
    parse_set,
    render_ap,
    render_presub,
    render_reserve,
)
from .policy import (
    CachedStore,
    ChangeNotice,
    Eip,
    FlatStore,
    Reservation,
    ReservationStore,
    StoreKind,
    TreeStore,
    UNRESTRICTED,
    UnreservedPolicy,
    build_store,
)
from .registry import (
    Presubscription,
    SubscriptionRecord,
    SubscriptionRegistry,
    UnknownSubscription,
)
from .engine import EngineConfig, FilterEngine, Mode, PauseAction, SubscribeDecision
from .broker import BrokerConfig, BrokerCore, RoutingTable, Session
from .server import BrokerServer, ThreadedBroker

__version__ = "0.1.0"
