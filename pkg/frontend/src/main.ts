import { ApiClient } from './api';
import { ReviewApp } from './app';

const root = document.getElementById('app');
if (root) {
  const base = (window as unknown as { STANCERAG_API?: string }).STANCERAG_API ?? '';
  const app = new ReviewApp(root, new ApiClient(base));
  void app.init();
}
