from .gateway import ChatMessage, CompletionResult, Gateway, fingerprint
from .tokens import count_tokens

__all__ = ["ChatMessage", "CompletionResult", "Gateway", "fingerprint", "count_tokens"]
