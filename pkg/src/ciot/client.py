"""
Channel clients used by sensor nodes (write) and the supervisor (read).

HttpChannelClient speaks the wire protocol to any compatible endpoint.
LocalChannelClient gives the same surface over an in-process broker for
lockstep runs, passing entries through the wire codec so both observe
identical field strings.
"""

from typing import Callable, List, Mapping, Optional

import requests

from ciot.broker import ChannelBroker
from ciot.wire import entry_from_json, entry_to_json, field_key, refined_from_json
from core.constants import DEFAULT_FEED_RESULTS, REQUEST_TIMEOUT_SECONDS
from core.exceptions import AuthError, BadRequestError, NotFoundError, TransportError
from logging_config import get_logger
from models.channel import ChannelEntry, PublishResult, RefinedSeries

logger = get_logger(__name__)

TRANSPORT_RETRY_AFTER = 1.0  # seconds suggested to callers after a transport failure


class ChannelClient:
    """Shared client surface. A client instance is meant for one task at a time."""

    def __init__(self, channel_id: int, write_key: Optional[str] = None, read_key: Optional[str] = None) -> None:
        self.channel_id = channel_id
        self.write_key = write_key
        self.read_key = read_key

    def publish(self, fields: Mapping[int, str]) -> PublishResult:
        raise NotImplementedError

    def fetch_last(self, channel_id: Optional[int] = None) -> Optional[ChannelEntry]:
        raise NotImplementedError

    def fetch_feed(self, results: int = DEFAULT_FEED_RESULTS, channel_id: Optional[int] = None) -> List[ChannelEntry]:
        raise NotImplementedError

    def fetch_refined(self, window: int, channel_id: Optional[int] = None) -> RefinedSeries:
        raise NotImplementedError

    def close(self) -> None:
        pass


class HttpChannelClient(ChannelClient):
    """Client for a ThingSpeak-compatible HTTP endpoint."""

    def __init__(self, endpoint: str, channel_id: int, write_key: Optional[str] = None,
                 read_key: Optional[str] = None, timeout: float = REQUEST_TIMEOUT_SECONDS) -> None:
        super().__init__(channel_id, write_key, read_key)
        self.endpoint: str = endpoint.rstrip("/")
        self.timeout = timeout
        self.session = requests.Session()

    def _request(self, method: str, path: str, **kwargs) -> requests.Response:
        url = f"{self.endpoint}{path}"
        try:
            return self.session.request(method, url, timeout=self.timeout, **kwargs)
        except requests.exceptions.Timeout as e:
            raise TransportError(f"{method} {url} timed out after {self.timeout}s", endpoint=self.endpoint,
                                 retryable=True, retry_after=TRANSPORT_RETRY_AFTER) from e
        except requests.exceptions.RequestException as e:
            raise TransportError(f"{method} {url} failed: {e}", endpoint=self.endpoint,
                                 retryable=True, retry_after=TRANSPORT_RETRY_AFTER) from e

    def _raise_for_error(self, response: requests.Response) -> None:
        if response.status_code == 401:
            raise AuthError(f"{response.request.method} {response.url}: key rejected")
        if response.status_code == 400:
            raise BadRequestError(f"{response.request.method} {response.url}: bad request")
        if response.status_code == 404:
            raise NotFoundError(f"{response.request.method} {response.url}: not found")
        if response.status_code != 200:
            raise TransportError(
                f"{response.request.method} {response.url}: unexpected status {response.status_code}",
                endpoint=self.endpoint, retryable=response.status_code >= 500,
                retry_after=TRANSPORT_RETRY_AFTER, status_code=response.status_code)

    def _json(self, response: requests.Response) -> dict:
        try:
            return response.json()
        except ValueError as e:
            raise TransportError(f"{response.url}: response is not JSON", endpoint=self.endpoint,
                                 retryable=False, status_code=response.status_code) from e

    def publish(self, fields: Mapping[int, str]) -> PublishResult:
        """
        POST /update with the write key and the given slots.

        Returns:
            PublishResult; entry id 0 means the broker rate limited the write

        Raises:
            AuthError, BadRequestError, TransportError
        """
        data = {"api_key": self.write_key}
        data.update({field_key(slot): value for slot, value in sorted(fields.items())})
        response = self._request("POST", "/update", data=data)
        self._raise_for_error(response)
        body = response.text.strip()
        if not body.isdigit():
            raise TransportError(f"Unexpected /update body '{body[:40]}'", endpoint=self.endpoint,
                                 retryable=False, status_code=response.status_code)
        return PublishResult(entry_id=int(body))

    def fetch_last(self, channel_id: Optional[int] = None) -> Optional[ChannelEntry]:
        """
        GET the newest entry.

        Returns:
            The entry, or None when the channel has no entries

        Raises:
            NotFoundError, AuthError, TransportError
        """
        channel_id = channel_id or self.channel_id
        response = self._request("GET", f"/channels/{channel_id}/feeds/last.json",
                                 params={"api_key": self.read_key})
        if response.status_code == 404:
            payload = self._json(response)
            if payload.get("error") == "empty":
                return None
        self._raise_for_error(response)
        return entry_from_json(self._json(response))

    def fetch_feed(self, results: int = DEFAULT_FEED_RESULTS, channel_id: Optional[int] = None) -> List[ChannelEntry]:
        channel_id = channel_id or self.channel_id
        response = self._request("GET", f"/channels/{channel_id}/feeds.json",
                                 params={"api_key": self.read_key, "results": results})
        self._raise_for_error(response)
        return [entry_from_json(item) for item in self._json(response).get("feeds", [])]

    def fetch_refined(self, window: int, channel_id: Optional[int] = None) -> RefinedSeries:
        channel_id = channel_id or self.channel_id
        response = self._request("GET", f"/channels/{channel_id}/refined.json",
                                 params={"api_key": self.read_key, "window": window})
        self._raise_for_error(response)
        return refined_from_json(self._json(response))

    def close(self) -> None:
        self.session.close()


class LocalChannelClient(ChannelClient):
    """Client bound directly to an in-process broker and a clock."""

    def __init__(self, broker: ChannelBroker, channel_id: int, clock: Callable[[], float],
                 write_key: Optional[str] = None, read_key: Optional[str] = None) -> None:
        super().__init__(channel_id, write_key, read_key)
        self.broker = broker
        self.clock = clock

    def publish(self, fields: Mapping[int, str]) -> PublishResult:
        return self.broker.write(self.channel_id, self.write_key, dict(fields), self.clock())

    def fetch_last(self, channel_id: Optional[int] = None) -> Optional[ChannelEntry]:
        entry = self.broker.read_last(channel_id or self.channel_id, self.read_key)
        return entry_from_json(entry_to_json(entry)) if entry else None

    def fetch_feed(self, results: int = DEFAULT_FEED_RESULTS, channel_id: Optional[int] = None) -> List[ChannelEntry]:
        entries = self.broker.read_feed(channel_id or self.channel_id, self.read_key, results)
        return [entry_from_json(entry_to_json(entry)) for entry in entries]

    def fetch_refined(self, window: int, channel_id: Optional[int] = None) -> RefinedSeries:
        channel_id = channel_id or self.channel_id
        self.broker.check_read_key(channel_id, self.read_key)
        return self.broker.refine(channel_id, window)
